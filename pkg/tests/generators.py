"""Random scenario and channel generators shared by the test modules."""
import numpy as np

from qbroadcast import corpus as cp
from qbroadcast import matcore as mc
from qbroadcast import qobjects as qo

HADAMARD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def random_channel(d_in, d_out, rng, kraus=3, out_dims=None):
    ks = [rng.normal(size=(d_out, d_in)) + 1j * rng.normal(size=(d_out, d_in)) for _ in range(kraus)]
    w, v = np.linalg.eigh(sum(k.conj().T @ k for k in ks))
    ks = [k @ (v / np.sqrt(w)) @ v.conj().T for k in ks]
    return qo.from_function(lambda x: sum(k @ x @ k.conj().T for k in ks), d_in, d_out, out_dims)


def random_povm(d, rng, outcomes=None):
    n = outcomes or d
    raw = [mc.random_density(d, rng) for _ in range(n)]
    w, v = np.linalg.eigh(sum(raw))
    s = (v / np.sqrt(w)) @ v.conj().T
    return qo.Povm([s @ r @ s for r in raw])


def rotated_antidiscrimination(n, u):
    states, povm = cp.antidiscrimination_states(n, u)
    return qo.Scenario(2, states, [povm], [povm])


def random_qubit_scenario(k, rng):
    """One of five qubit families, cycling with ``k``; returns (family, scenario)."""
    kind = k % 5
    u = mc.random_unitary(2, rng)
    if kind == 0:
        return "antidiscrimination-3", rotated_antidiscrimination(3, u)
    if kind == 1:
        return "antidiscrimination-4", rotated_antidiscrimination(4, u)
    if kind == 2:
        states = [u @ np.diag(rng.dirichlet([1, 1])) @ u.conj().T for _ in range(3)]
        a = qo.projective_povm(mc.random_unitary(2, rng))
        b = qo.projective_povm(mc.random_unitary(2, rng))
        return "classical-states", qo.Scenario(2, states, [a], [b])
    if kind == 3:
        a = qo.projective_povm(u)
        return "commuting-measurement", qo.Scenario(2, [mc.random_pure(2, rng) for _ in range(3)], [a], [a])
    v = mc.random_unitary(2, rng)
    m = [qo.projective_povm(v), qo.projective_povm(v @ HADAMARD)]
    return "complementary-spanning", qo.Scenario(2, qo.spanning_states(2), m, m)


def _copy_channel(u, d):
    projs = [mc.proj(u[:, i]) for i in range(d)]
    return qo.measure_prepare_channel(qo.Povm(projs), [np.kron(p, p) for p in projs], (d, d))


def random_test_and_channel(k, rng):
    """A (scenario, candidate channel) pair; the families mix passes and failures."""
    d = 2 + k % 2
    kind = (k // 2) % 6
    u = mc.random_unitary(d, rng)
    coin = qo.coin_povm(d, rng.dirichlet(np.ones(2)))
    if kind == 0:
        # states diagonal in the copy basis: the copy channel passes any test
        states = [u @ np.diag(rng.dirichlet(np.ones(d))) @ u.conj().T for _ in range(3)]
        s = qo.Scenario(d, states, [random_povm(d, rng)], [random_povm(d, rng)])
        return s, _copy_channel(u, d)
    if kind == 1:
        # copying in the measured basis is invisible to that measurement
        a = qo.projective_povm(u)
        states = [mc.random_density(d, rng) for _ in range(3)]
        b = a if rng.random() < 0.5 else random_povm(d, rng)
        return qo.Scenario(d, states, [a], [b]), _copy_channel(u, d)
    if kind == 2:
        # keep the input, discard into a fixed state; the second side sees only coins or not
        states = [mc.random_density(d, rng) for _ in range(3)]
        sigma = mc.random_density(d, rng)
        lam = qo.from_function(lambda x: np.kron(x, sigma), d, d * d, (d, d))
        b = coin if rng.random() < 0.5 else random_povm(d, rng)
        return qo.Scenario(d, states, [random_povm(d, rng)], [b]), lam
    if kind == 3:
        states = [mc.random_density(d, rng) for _ in range(3)]
        s = qo.Scenario(d, states, [random_povm(d, rng)], [random_povm(d, rng)])
        return s, random_channel(d, d * d, rng, out_dims=(d, d))
    if kind == 4:
        # a passing copy channel nudged off the passing set
        a = qo.projective_povm(u)
        states = [mc.random_density(d, rng) for _ in range(3)]
        lam = _copy_channel(u, d)
        noise = random_channel(d, d * d, rng)
        eps = 10.0 ** rng.uniform(-5, -2)
        return qo.Scenario(d, states, [a], [a]), qo.ChoiChannel((1 - eps) * lam.choi + eps * noise.choi,
                                                                 d, d * d, (d, d))
    # kind 5: dephasing on the first side, swapped copy on the second
    a = qo.projective_povm(u)
    states = [u @ np.diag(rng.dirichlet(np.ones(d))) @ u.conj().T if rng.random() < 0.5
              else mc.random_density(d, rng) for _ in range(3)]
    lam = qo.swap_channel_output(_copy_channel(u, d))
    return qo.Scenario(d, states, [a], [coin, a]), lam
