"""Registry of criterion identifiers used in reports.

Every report line that states a verdict carries one of these ids, so that
text reports, structured records and exit codes all refer to the same
fixed vocabulary.
"""

CRITERIA = {
    # scalar certificates
    "gershgorin": "row-dominance test on the coupling matrix, sufficient for positive definiteness",
    "ellipticity": "smallest eigenvalue of the symmetrized coupling matrix certifies coercivity",
    "continuity": "operator-norm bound on the full form from diagonal and coupling constants",
    "accretivity": "off-diagonal coupling blocks positive/negative semidefinite, sufficient for accretivity",
    "analyticity_angle": "sector half-angle of the generated analytic semigroup",
    "stability": "positive definite coupling with zero weak-coupling constants implies exponential decay",
    # numerical-range checks
    "sector": "sampled form values stay inside the certified sector",
    "parabola": "sampled imaginary parts obey the mixed-norm parabola bound",
    # invariance and order checks
    "subspace_C": "strip around a projected subspace is invariant (coupling residual, trial side)",
    "subspace_B": "ball around a projected subspace is invariant (coupling residual, test side)",
    "product_subspace": "componentwise product subspace is invariant",
    "subsystem": "leading subsystem evolves autonomously (lower coupling blocks vanish)",
    "row_sums": "coefficient row sums are constant across components, cell by cell",
    "column_sums": "coefficient column sums are constant across components, cell by cell",
    "realness": "all form blocks are real, so real data stay real",
    "positivity": "nonnegative data stay nonnegative (sign test on couplings plus runtime trials)",
    "domination": "full evolution dominates the decoupled diagonal evolution on moduli",
    "linf": "unit sup-norm ball stays invariant under the evolution",
    "strip_runtime": "runtime strip invariance at prescribed distances from the projected subspace",
}
