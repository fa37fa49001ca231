"""Default tolerances, collected in one place.

Most bounds scale with the size of the data they police; the scale factor
is always ``max(1, norm)`` so that tuples with tiny norms are judged on an
absolute scale.  The ladder deliberately leaves about two decades between
detection thresholds (structural tests) and acceptance thresholds (final
residuals) so one noisy stage cannot cascade into a false failure.
"""

from dataclasses import dataclass, asdict


@dataclass(frozen=True)
class Tolerances:
    # Hermiticity / unitarity admission checks
    hermitian_rel: float = 1e-12          # times max(1, ||A||)
    unitary_rel: float = 1e-10            # times N

    # eigenvalue clustering
    gap_tol: float = 1e-8                 # times max(1, ||A||)
    interpolation_sep_rel: float = 1e-3   # minimum cluster separation for Lagrange

    # generator regularization
    singular_eig_rel: float = 1e-10       # below this, shift by ||A|| + 1

    # polynomial machinery
    prune_rel: float = 5e-12              # drop interpolated coefficients below this
    degenerate_lead_rel: float = 1e-12    # leading-coefficient cutoff on a line
    root_residual_rel: float = 1e-6       # |p(root)| relative residual trust bound
    cluster_rel: float = 1e-6             # base root-cluster tolerance, times (1+max|root|)

    # sampling
    lines: int = 8                        # random lines per power test
    line_retries: int = 10                # redraws before LineSamplingFailed
    word_cap: int = 10000                 # enumeration cap (flagged, not fatal)
    branch_eps: float = 1e-4              # step for branch-derivative tracking

    # admissibility
    admissible_sep_rel: float = 1e-6      # generator cluster separation, times max(1, ||A||)
    admissible_radius: float = 0.05       # default perturbation radius
    admissible_max_tries: int = 50

    # block structure ladder
    structural_tol: float = 1e-7          # factor/unify/cycle checks, times max(1, ||A||)
    scalar_block_tol: float = 1e-6        # post-conjugation scalar check, times max(1, ||A||)
    residual_tol: float = 1e-6            # final decomposition residual, times max ||A_l||

    def as_dict(self):
        return asdict(self)

    def cluster_tol(self, roots_scale):
        """Root-cluster tolerance at a given root magnitude scale
        (``1 + max |root|``)."""
        return self.cluster_rel * roots_scale


DEFAULT = Tolerances()
