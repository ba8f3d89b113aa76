"""
Genetic toggle model for Lambda Phage: counts of the CI and Cro proteins.

Drift is S*f(N) - N/tau, with f built from the occupation probabilities of the
27 operator states. Diffusion is diag(g_CI, g_Cro), g = sqrt(S^2 f + N/tau), or
the identity for the comparison run.
"""

import csv
import logging
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, Tuple

import numpy as np

from ..errors import EquilibriumNotFoundError, ModelDomainError
from ..grid_core import Domain
from .base import AttractorSpec, Model, refine_equilibrium

logger = logging.getLogger(__name__)

# binding free energy G(s) in kcal/mol; s lists the occupants of OR3, OR2, OR1
# (0 free, 1 CI, 2 Cro)
BINDING_ENERGIES: Dict[str, float] = {
    "000": 0.0, "001": -12.5, "010": -10.5, "100": -9.5,
    "011": -25.7, "101": -22.0, "110": -22.9, "111": -35.4,
    "002": -14.4, "020": -13.1, "200": -15.5,
    "021": -25.6, "120": -22.6, "121": -35.1, "201": -28.0, "210": -26.0,
    "211": -41.2, "012": -24.9, "102": -23.9, "112": -37.3,
    "022": -27.5, "202": -29.9, "220": -28.6, "222": -43.0,
    "221": -41.1, "212": -40.4, "122": -37.0,
}

# P_RM is stimulated by CI on OR2 with OR3 free, and runs at the basal rate
# while OR3 is free and OR2 holds no CI. P_R needs OR1 and OR2 free.
PRM_ACTIVE_STATES = ("010", "011", "012")
PRM_BASAL_STATES = ("000", "001", "002", "020", "021", "022")
PR_ACTIVE_STATES = ("000", "100", "200")

LYSOGENIC_SEED = (212.0, 4.5)
LYTIC_SEED = (0.1654, 203.0115)
TRANSITION_SEED = (115.0625, 18.6875)


@dataclass(frozen=True)
class LambdaPhageParams:
    RT: float = 0.617
    S_CI: float = 1.0
    S_Cro: float = 20.0
    R_RM: float = 0.115
    R_RM_u: float = 0.01045
    R_R: float = 0.30
    tau_CI: float = 2943.0
    tau_Cro: float = 5194.0
    dG_CI: float = -11.1
    dG_Cro: float = -7.0
    V_cell: float = 2e-15
    N_A: float = 6.022140857e23
    binding: Dict[str, float] = field(default_factory=lambda: dict(BINDING_ENERGIES))

    def __post_init__(self):
        expected = {"".join(d) for d in product("012", repeat=3)}
        if set(self.binding) != expected:
            missing = sorted(expected - set(self.binding))
            extra = sorted(set(self.binding) - expected)
            raise ValueError(f"binding table must cover the 27 states (missing {missing}, unknown {extra})")

    @property
    def states(self) -> Tuple[str, ...]:
        return tuple(sorted(self.binding))

    @property
    def i_s(self) -> np.ndarray:
        return np.array([s.count("1") for s in self.states], dtype=float)

    @property
    def j_s(self) -> np.ndarray:
        return np.array([s.count("2") for s in self.states], dtype=float)

    @property
    def G(self) -> np.ndarray:
        return np.array([self.binding[s] for s in self.states])

    def state_index(self, state: str) -> int:
        return self.states.index(state)


DEFAULT_PARAMS = LambdaPhageParams()


def _dimer_concentration(monomer, dG, RT):
    # m/2 + e/8 - sqrt(m e/8 + e^2/64), rewritten as (m^2/4)/(p + q)
    e = np.exp(dG / RT)
    p = 0.5 * monomer + e / 8.0
    q = np.sqrt(monomer * e / 8.0 + e * e / 64.0)
    return 0.25 * monomer * monomer / (p + q)


def lambda_phage_dimers(n_ci, n_cro, params: LambdaPhageParams = DEFAULT_PARAMS):
    """Molecule counts -> dimer concentrations ([CI], [Cro]) in molar"""
    n_ci = np.asarray(n_ci, dtype=float)
    n_cro = np.asarray(n_cro, dtype=float)
    if np.any(n_ci < 0) or np.any(n_cro < 0):
        raise ModelDomainError("molecule counts must be non-negative")
    volume = params.V_cell * params.N_A
    ci = _dimer_concentration(n_ci / volume, params.dG_CI, params.RT)
    cro = _dimer_concentration(n_cro / volume, params.dG_Cro, params.RT)
    return ci, cro


def lambda_phage_state_probabilities(ci, cro, params: LambdaPhageParams = DEFAULT_PARAMS) -> np.ndarray:
    """P_s over the 27 states (axis 0, sorted state order), normalized"""
    ci = np.asarray(ci, dtype=float)
    cro = np.asarray(cro, dtype=float)
    shape = np.broadcast(ci, cro).shape
    expand = (slice(None),) + (None,) * len(shape)
    i_s = params.i_s[expand]
    j_s = params.j_s[expand]

    with np.errstate(divide="ignore", invalid="ignore"):
        log_ci = np.log(ci)
        log_cro = np.log(cro)
        # 0 * log(0) must stay 0 for unoccupied states
        term_ci = np.where(i_s > 0, i_s * log_ci, 0.0)
        term_cro = np.where(j_s > 0, j_s * log_cro, 0.0)
    log_w = term_ci + term_cro - params.G[expand] / params.RT
    log_w = np.broadcast_to(log_w, (len(params.states),) + shape)
    log_w = log_w - np.max(log_w, axis=0, keepdims=True)
    w = np.exp(log_w)
    return w / np.sum(w, axis=0, keepdims=True)


def lambda_phage_rates(n_ci, n_cro, params: LambdaPhageParams = DEFAULT_PARAMS):
    """(f_CI, f_Cro) production rates"""
    ci, cro = lambda_phage_dimers(n_ci, n_cro, params)
    P = lambda_phage_state_probabilities(ci, cro, params)

    def occupancy(states):
        return sum(P[params.state_index(s)] for s in states)

    f_ci = params.R_RM * occupancy(PRM_ACTIVE_STATES) + params.R_RM_u * occupancy(PRM_BASAL_STATES)
    f_cro = params.R_R * occupancy(PR_ACTIVE_STATES)
    return f_ci, f_cro


def export_binding_table_csv(path: str, params: LambdaPhageParams = DEFAULT_PARAMS) -> str:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state", "i_s", "j_s", "G"])
        for s in params.states:
            writer.writerow([s, s.count("1"), s.count("2"), repr(params.binding[s])])
    return path


class LambdaPhageModel(Model):
    name = "lambda_phage"
    default_boundary_policy = "ComputeWholeDomain"
    default_N = 1024

    def __init__(self, diffusion: str = "diagonal", params: LambdaPhageParams = DEFAULT_PARAMS,
                 refine: bool = True):
        super().__init__()
        if diffusion not in ("diagonal", "identity"):
            raise ValueError(f"diffusion must be 'diagonal' or 'identity', got '{diffusion}'")
        self.diffusion_kind = diffusion
        self.constant_diffusion = diffusion == "identity"
        self.params = params
        self.default_domain = Domain(xmin=0, xmax=250, ymin=0, ymax=250)

        lysogenic = np.array(LYSOGENIC_SEED)
        self.lytic = np.array(LYTIC_SEED)
        if refine:
            lysogenic = refine_equilibrium(self, LYSOGENIC_SEED)
            try:
                self.lytic = refine_equilibrium(self, LYTIC_SEED)
            except EquilibriumNotFoundError as e:
                logger.warning(f"Lytic equilibrium not refined, keeping seed: {e}")
            logger.info(f"Lambda Phage equilibria: lysogenic {lysogenic}, lytic {self.lytic}")
        self.attractor = AttractorSpec.stable_point(lysogenic)
        self.known_saddles = (np.array(TRANSITION_SEED),)

    def check_point(self, x):
        super().check_point(x)
        if x[0] < 0 or x[1] < 0:
            raise ModelDomainError(f"negative molecule count at {tuple(x)}")

    def _counts(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        bad = (X < 0) | (Y < 0)
        return np.where(bad, 0.0, X), np.where(bad, 0.0, Y), bad

    def drift_field(self, X, Y):
        n_ci, n_cro, bad = self._counts(X, Y)
        f_ci, f_cro = lambda_phage_rates(n_ci, n_cro, self.params)
        p = self.params
        b1 = p.S_CI * f_ci - n_ci / p.tau_CI
        b2 = p.S_Cro * f_cro - n_cro / p.tau_Cro
        return np.where(bad, np.nan, b1), np.where(bad, np.nan, b2)

    def noise_amplitudes(self, X, Y):
        """(g_CI, g_Cro)"""
        n_ci, n_cro, bad = self._counts(X, Y)
        f_ci, f_cro = lambda_phage_rates(n_ci, n_cro, self.params)
        p = self.params
        g_ci = np.sqrt(p.S_CI ** 2 * f_ci + n_ci / p.tau_CI)
        g_cro = np.sqrt(p.S_Cro ** 2 * f_cro + n_cro / p.tau_Cro)
        return np.where(bad, np.nan, g_ci), np.where(bad, np.nan, g_cro)

    def sigma_field(self, X, Y):
        X = np.asarray(X, dtype=float)
        zeros = np.zeros_like(X)
        if self.diffusion_kind == "identity":
            bad = (X < 0) | (np.asarray(Y) < 0)
            ones = np.where(bad, np.nan, 1.0)
            return ones, zeros, zeros, ones
        g_ci, g_cro = self.noise_amplitudes(X, Y)
        return g_ci, zeros, zeros, g_cro

    def describe(self) -> dict:
        info = super().describe()
        info.update(diffusion=self.diffusion_kind, lytic=self.lytic.tolist())
        return info


def lambda_phage_model(diffusion: str = "diagonal") -> LambdaPhageModel:
    return LambdaPhageModel(diffusion=diffusion)
