import numpy as np
import pytest

from ehaoi.model import HarvesterModel, RecoveryModel, SystemConfig, TxMode, prepare
from ehaoi.presets import two_mode_lte
from ehaoi.statespace import build_kernel

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def minimal_config() -> SystemConfig:
    return SystemConfig(5, 4, (TxMode(2, 0.4),), HarvesterModel.constant(1), RecoveryModel(0, 0.0))


def eighteen_state_config() -> SystemConfig:
    """A_max=3, one mode, no recovery, one harvester state, battery 0..2: 18 states."""
    return SystemConfig(2, 3, (TxMode(2, 0.4),), HarvesterModel.constant(1), RecoveryModel(0, 0.0))


def error_free_config(a_max: int = 4) -> SystemConfig:
    """Perfect channel and harvest equal to the transmit power: transmit every slot."""
    return SystemConfig(1, a_max, (TxMode(1, 0.0),), HarvesterModel.constant(1), RecoveryModel(0, 0.0))


def lte_config(b_max: int = 10, p_rec: float = 0.8, **kw) -> SystemConfig:
    return two_mode_lte(p_rec=p_rec, n_rec=2, harvest_on=2, b_max=b_max, **kw)


def random_config(rng: np.random.Generator, max_modes=3, max_rec=3, max_h=3, max_b=15, max_a=12) -> SystemConfig:
    """A random valid instance within the given size limits."""
    m = int(rng.integers(1, max_modes + 1))
    n_h = int(rng.integers(1, max_h + 1))
    n_rec = int(rng.integers(0, max_rec + 1))
    b_max = int(rng.integers(0, max_b + 1))
    a_max = int(rng.integers(2, max_a + 1))
    harvest = tuple(int(x) for x in rng.integers(0, 4, size=n_h))
    rows = []
    for _ in range(n_h):
        w = rng.random(n_h) + 0.05
        w /= w.sum()
        w[-1] = 1.0 - w[:-1].sum()
        rows.append(tuple(float(x) for x in w))
    if b_max + max(harvest) == 0:
        harvest = (1,) + harvest[1:]
    cap = b_max + max(harvest)
    powers = [int(x) for x in rng.integers(1, cap + 3, size=m)]
    powers[0] = int(rng.integers(1, cap + 1))
    modes = tuple(TxMode(p, float(rng.choice([0.0, rng.random(), 1.0], p=[0.1, 0.8, 0.1]))) for p in powers)
    return SystemConfig(b_max, a_max, modes, HarvesterModel(tuple(rows), harvest),
                        RecoveryModel(n_rec, float(rng.choice([rng.random(), 1.0], p=[0.8, 0.2]))))


@pytest.fixture
def eighteen():
    return build_kernel(prepare(eighteen_state_config()))


@pytest.fixture
def lte_kernel():
    return build_kernel(prepare(lte_config()))


def check_kernel_structure(kernel) -> list[str]:
    """Independent re-derivation of every stored kernel entry's structure.

    Returns a list of human-readable violations (empty when the kernel is sound).
    """
    cfg, space = kernel.cfg, kernel.space
    ages, modes, hs, bs = space.arrays
    M, N, A, B = cfg.num_modes, cfg.n_rec, cfg.a_max, cfg.b_max
    problems = []
    for d, mat in enumerate(kernel.matrices):
        sums = np.asarray(mat.sum(axis=1)).ravel()
        feas = kernel.feasible[d]
        if np.any(np.abs(sums[feas] - 1.0) > 1e-12):
            problems.append(f"action {d}: row sums off by {np.abs(sums[feas] - 1).max():.2e}")
        if np.any(sums[~feas] != 0):
            problems.append(f"action {d}: rows stored for infeasible states")
        expect_feas = bs + cfg.harvest[hs] - (cfg.powers[d - 1] if d else 0) >= 0
        if not np.array_equal(feas, expect_feas):
            problems.append(f"action {d}: feasibility mask disagrees with the energy constraint")
        coo = mat.tocoo()
        s, t, p = coo.row, coo.col, coo.data
        if np.any((p <= 0) | (p > 1)):
            problems.append(f"action {d}: probability outside (0, 1]")
        a, m, h, b = ages[s], modes[s], hs[s], bs[s]
        a2, m2, h2, b2 = ages[t], modes[t], hs[t], bs[t]
        aged = np.minimum(a + 1, A)
        if np.any(cfg.matrix[h, h2] <= 0):
            problems.append(f"action {d}: harvester move with zero probability")
        if np.any((b2 < 0) | (b2 > B)):
            problems.append(f"action {d}: battery out of range")
        if d == 0:
            if np.any(a2 != aged):
                problems.append("idle: age must step up (clamped)")
            is_tx = (m >= 1) & (m <= M)
            post = m > M
            mm = np.where(is_tx, m, np.where(post, (m - M - 1) // max(N, 1) + 1, 0))
            jj = np.where(post, (m - M - 1) % max(N, 1) + 1, 0)
            rec = (is_tx | post) & (jj < N)
            nxt = np.where(rec, M + (mm - 1) * N + jj + 1, 0)
            if np.any(m2 != nxt):
                problems.append("idle: wrong mode successor")
            base = np.minimum(b + cfg.harvest[h], B)
            boosted = np.minimum(b + cfg.harvest[h] + np.where(rec, cfg.increments[np.maximum(mm - 1, 0)], 0), B)
            if np.any((b2 != base) & (b2 != boosted)):
                problems.append("idle: battery update is neither plain harvest nor harvest plus recovery")
        else:
            if np.any((a2 != 1) & (a2 != aged)):
                problems.append(f"tx {d}: age must reset or step up")
            if np.any(m2 != d):
                problems.append(f"tx {d}: next mode must be just-transmitted")
            b_t = b + cfg.harvest[h] - cfg.powers[d - 1]
            if np.any(b_t < 0) or np.any(b2 != np.minimum(b_t, B)):
                problems.append(f"tx {d}: battery must be the clamped post-transmission level")
    return problems
