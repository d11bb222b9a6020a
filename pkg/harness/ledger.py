"""Measured counterparts of the convergence theorem's hypotheses."""
from dataclasses import dataclass

NOT_APPLICABLE = "not applicable"


def kappa_from_exponents(alpha, beta, gamma1, gamma2) -> float:
    """κ = min(α - (β + 2γ2), 1 - (γ1 + γ2))."""
    return min(alpha - (beta + 2 * gamma2), 1 - (gamma1 + gamma2))


@dataclass
class HypothesisLedger:
    eps: float
    dim: int
    alpha: float
    beta: float
    gamma1: float
    gamma2: float
    c0: float
    rho_vm: float = 0.0
    m_alpha: float = 0.0
    eps_adot_l2: float = 0.0
    b_l2: float = 0.0
    rho_vp: float = 0.0
    fourth_moment_vp: float = 0.0
    rho_delta1: float = 0.0
    xi_delta1: float = 0.0
    fields_delta1: float = 0.0
    initial_energy: float = None
    mean_e0: float = 0.0
    mean_e0_bound: float = None

    @property
    def kappa(self) -> float:
        return kappa_from_exponents(self.alpha, self.beta, self.gamma1, self.gamma2)

    def observe(self, row: dict):
        """Fold one snapshot row into the running suprema."""
        self.rho_vm = max(self.rho_vm, row["sup_rho_vm"], row["l1_rho_vm"])
        self.m_alpha = max(self.m_alpha, row["sup_m_alpha"])
        self.eps_adot_l2 = max(self.eps_adot_l2, row["eps_adot_l2"])
        self.b_l2 = max(self.b_l2, row["b_l2"])
        self.rho_vp = max(self.rho_vp, row["sup_rho_vp"])
        self.fourth_moment_vp = max(self.fourth_moment_vp, row["fourth_moment_vp"])
        self.rho_delta1 = max(self.rho_delta1, row["rho_delta1"])
        self.xi_delta1 = max(self.xi_delta1, row["xi_delta1"])
        self.fields_delta1 = max(self.fields_delta1, row["fields_delta1"])
        if self.initial_energy is None:
            self.initial_energy = row["energy_vm"]

    def _scaled(self, name, measured, exponent):
        normalized = measured * self.eps**exponent
        return {
            "hypothesis": name,
            "measured": measured,
            "exponent": exponent,
            "normalized": normalized,
            "bound": self.c0,
            "holds": normalized <= self.c0,
        }

    def _plain(self, name, measured):
        return {
            "hypothesis": name,
            "measured": measured,
            "exponent": None,
            "normalized": None,
            "bound": None,
            "holds": None,
        }

    def entries(self) -> list:
        entries = [
            self._scaled("density_l1_linf", self.rho_vm, 0.0),
            self._scaled("moment_alpha", self.m_alpha, self.beta),
            self._scaled("transverse_electric_l2", self.eps_adot_l2, self.gamma1),
        ]
        if self.dim == 1:
            entries.append(
                {
                    "hypothesis": "magnetic_l2",
                    "measured": NOT_APPLICABLE,
                    "exponent": self.gamma2,
                    "normalized": NOT_APPLICABLE,
                    "bound": self.c0,
                    "holds": NOT_APPLICABLE,
                }
            )
        else:
            entries.append(self._scaled("magnetic_l2", self.b_l2, self.gamma2))
        entries += [
            self._plain("vp_density_linf", self.rho_vp),
            self._plain("vp_fourth_moment_l1", self.fourth_moment_vp),
            self._plain("initial_energy", self.initial_energy),
        ]
        mean_field = self._plain("mean_initial_electric_field", self.mean_e0)
        if self.mean_e0_bound is not None:
            mean_field.update(bound=self.mean_e0_bound, holds=self.mean_e0 <= self.mean_e0_bound * (1 + 1e-12))
        entries.append(mean_field)
        return entries

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "kappa": self.kappa,
            "exponents": {"alpha": self.alpha, "beta": self.beta, "gamma1": self.gamma1, "gamma2": self.gamma2},
            "c0": self.c0,
            "entries": self.entries(),
            "analytic_bounds": {
                "rho_delta1": self.rho_delta1,
                "xi_delta1": self.xi_delta1,
                "fields_delta1": self.fields_delta1,
            },
        }
