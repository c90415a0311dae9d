import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from einselect.errors import StateError, UndefinedConditionalError
from einselect.hilbert import (
    DensityMatrix,
    PureState,
    classical_correlation,
    conditional_state,
    discord,
    mutual_information,
    partial_trace,
    purity,
    schmidt_decompose,
    tensor_product,
    von_neumann_entropy,
)

from oracles import brute_discord_qubit, entropy_bits, random_density, random_pure, reduce_einsum

BELL = PureState(np.array([1, 0, 0, 1]) / math.sqrt(2), (2, 2))
H2 = np.array([[1, 1], [1, -1]]) / math.sqrt(2)

seeds = st.integers(0, 2 ** 32 - 1)


# ---------------------------------------------------------------------------
# construction


def test_pure_state_rejects_bad_norm_and_dims():
    with pytest.raises(StateError):
        PureState(np.array([1.0, 1.0]), (2,))
    with pytest.raises(StateError):
        PureState(np.array([1.0, 0, 0]), (2,))


def test_density_rejects_non_hermitian():
    with pytest.raises(StateError):
        DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]]), (2,))


def test_density_rejects_negative_eigenvalue():
    with pytest.raises(StateError):
        DensityMatrix(np.array([[1.2, 0], [0, -0.2]]), (2,))


def test_json_roundtrip():
    psi = PureState(np.array([0.6, 0.8j]), (2,))
    back = PureState.from_json(psi.to_json())
    assert np.allclose(back.amplitudes, psi.amplitudes)
    rho = psi.density()
    assert np.allclose(DensityMatrix.from_json(rho.to_json()).matrix, rho.matrix)


# ---------------------------------------------------------------------------
# tensor product


@pytest.mark.parametrize("a, b, expected", [
    ([1, 0], [1, 0], [1, 0, 0, 0]),
    (np.array([1, 1]) / math.sqrt(2), [0, 1], np.array([0, 1, 0, 1]) / math.sqrt(2)),
])
def test_tensor_product_pure(a, b, expected):
    out = tensor_product(PureState(np.array(a, dtype=complex), (2,)), PureState(np.array(b, dtype=complex), (2,)))
    assert out.dims == (2, 2)
    assert np.allclose(out.amplitudes, expected)


def test_tensor_product_density():
    out = tensor_product(DensityMatrix.diag([0.5, 0.5]), DensityMatrix.diag([1, 0]))
    assert np.allclose(out.matrix, np.diag([0.5, 0, 0.5, 0]))


def test_tensor_product_mixed_kinds_rejected():
    with pytest.raises((StateError, TypeError)):
        tensor_product(BELL, DensityMatrix.diag([1, 0]))


# ---------------------------------------------------------------------------
# partial trace


def test_partial_trace_bell():
    assert np.allclose(partial_trace(BELL.density(), [0]).matrix, np.eye(2) / 2)


def test_partial_trace_product_returns_factor():
    rng = np.random.default_rng(1)
    rA, rB = random_density(rng, 2), random_density(rng, 3)
    joint = tensor_product(DensityMatrix(rA, (2,)), DensityMatrix(rB, (3,)))
    assert np.allclose(partial_trace(joint, [0]).matrix, rA, atol=1e-12)
    assert np.allclose(partial_trace(joint, [1]).matrix, rB, atol=1e-12)


def test_partial_trace_premeasurement_third():
    a, b = math.sqrt(1 / 3), math.sqrt(2 / 3)
    psi = PureState(np.array([a, 0, 0, b]), (2, 2))
    assert np.allclose(partial_trace(psi, [0]).matrix, np.diag([1 / 3, 2 / 3]))


def test_partial_trace_empty_keep_rejected():
    with pytest.raises((StateError, ValueError)):
        partial_trace(BELL.density(), [])


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 4), st.integers(2, 4))
def test_partial_trace_matches_einsum(seed, dA, dB):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, dA * dB)
    dm = DensityMatrix(rho, (dA, dB))
    assert np.allclose(partial_trace(dm, [0]).matrix, reduce_einsum(rho, dA, dB, "A"), atol=1e-12)
    assert np.allclose(partial_trace(dm, [1]).matrix, reduce_einsum(rho, dA, dB, "B"), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 5), st.integers(2, 5))
def test_complementary_reductions_share_spectrum(seed, dA, dB):
    rng = np.random.default_rng(seed)
    psi = PureState(random_pure(rng, dA * dB), (dA, dB))
    la = np.sort(np.linalg.eigvalsh(partial_trace(psi, [0]).matrix))[::-1]
    lb = np.sort(np.linalg.eigvalsh(partial_trace(psi, [1]).matrix))[::-1]
    k = min(dA, dB)
    assert np.allclose(la[:k], lb[:k], atol=1e-10)


def test_pure_vector_reduction_matches_density_route():
    rng = np.random.default_rng(3)
    psi = PureState(random_pure(rng, 2 * 3 * 2), (2, 3, 2))
    for keep in ([0], [1], [0, 2], [1, 2]):
        assert np.allclose(partial_trace(psi, keep).matrix, partial_trace(psi.density(), keep).matrix, atol=1e-12)


# ---------------------------------------------------------------------------
# entropy and purity


@pytest.mark.parametrize("probs, H, P", [
    ([1, 0], 0.0, 1.0),
    ([0.5, 0.5], 1.0, 0.5),
    ([0.25, 0.75], 0.811278, 0.625),
])
def test_entropy_and_purity_examples(probs, H, P):
    rho = DensityMatrix.diag(probs)
    assert von_neumann_entropy(rho) == pytest.approx(H, abs=1e-6)
    assert purity(rho) == pytest.approx(P, abs=1e-12)


def test_entropy_quarter_matches_oracle():
    assert von_neumann_entropy(DensityMatrix.diag([0.25, 0.75])) == pytest.approx(entropy_bits([0.25, 0.75]), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 6))
def test_entropy_unitary_invariance(seed, d):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, d)
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    a = von_neumann_entropy(DensityMatrix(rho, (d,)))
    b = von_neumann_entropy(DensityMatrix(Q @ rho @ Q.conj().T, (d,), check=False))
    assert a == pytest.approx(b, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 6))
def test_purity_bounds(seed, d):
    p = purity(DensityMatrix(random_density(np.random.default_rng(seed), d), (d,)))
    assert 1 / d - 1e-12 <= p <= 1 + 1e-12


# ---------------------------------------------------------------------------
# Schmidt


def test_schmidt_bell_degenerate():
    sf = schmidt_decompose(BELL)
    assert np.allclose(sf.coefficients, [1 / math.sqrt(2)] * 2)
    assert sf.degenerate


def test_schmidt_product():
    psi = PureState(np.kron([0.6, 0.8], [1, 0]).astype(complex), (2, 2))
    assert np.allclose(schmidt_decompose(psi).coefficients, [1.0])


def test_schmidt_sorted_coefficients():
    psi = PureState(np.array([0.6, 0, 0, 0.8]), (2, 2))
    sf = schmidt_decompose(psi)
    assert np.allclose(sf.coefficients, [0.8, 0.6])
    assert not sf.degenerate


@pytest.mark.parametrize("dA, dB", [(a, b) for a in range(2, 9) for b in range(2, 9)])
def test_schmidt_reconstruction(dA, dB):
    rng = np.random.default_rng(dA * 10 + dB)
    for _ in range(1000 // 49 + 1):
        psi = PureState(random_pure(rng, dA * dB), (dA, dB))
        sf = schmidt_decompose(psi)
        assert np.allclose(sf.reconstruct(), psi.amplitudes, atol=1e-10)
        assert abs(np.sum(sf.coefficients ** 2) - 1) < 1e-10
        for B in (sf.left_basis, sf.right_basis):
            assert np.allclose(B.conj().T @ B, np.eye(B.shape[1]), atol=1e-10)


@pytest.mark.slow
def test_schmidt_reconstruction_full_count():
    rng = np.random.default_rng(0)
    for dA in range(2, 9):
        for dB in range(2, 9):
            for _ in range(1000):
                psi = PureState(random_pure(rng, dA * dB), (dA, dB))
                assert np.allclose(schmidt_decompose(psi).reconstruct(), psi.amplitudes, atol=1e-10)


# ---------------------------------------------------------------------------
# conditional states


def _decohered(N=3, a=None):
    a = np.ones(N) / math.sqrt(N) if a is None else np.asarray(a)
    m = np.zeros((N * N, N * N))
    for k in range(N):
        i = k * N + k
        m[i, i] = abs(a[k]) ** 2
    return DensityMatrix(m, (N, N))


def _fourier(N):
    j = np.arange(N)
    return np.exp(2j * np.pi * np.outer(j, j) / N) / math.sqrt(N)


def test_conditional_on_pointer_is_pure():
    rho = _decohered(3, [0.5, 0.5, math.sqrt(0.5)])
    for k in range(3):
        P = np.zeros((3, 3))
        P[k, k] = 1
        cond, p = conditional_state(rho, P, measured=1)
        assert purity(cond) == pytest.approx(1.0, abs=1e-12)
        assert cond.matrix[k, k].real == pytest.approx(1.0)


def test_conditional_on_conjugate_is_uniform():
    N = 3
    rho = _decohered(N)
    F = _fourier(N)
    for j in range(N):
        b = F[:, j]
        cond, p = conditional_state(rho, np.outer(b, b.conj()), measured=1)
        assert np.allclose(cond.matrix, np.eye(N) / N, atol=1e-12)
        assert p == pytest.approx(1 / N)


def test_conditional_pure_premeasurement_any_basis():
    rng = np.random.default_rng(4)
    a = random_pure(rng, 3)
    v = np.zeros(9, dtype=complex)
    for k in range(3):
        v[k * 3 + k] = a[k]
    psi = PureState(v, (3, 3))
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    for j in range(3):
        cond, _ = conditional_state(psi, np.outer(Q[:, j], Q[:, j].conj()), measured=1)
        assert purity(cond) == pytest.approx(1.0, abs=1e-10)


def test_conditional_zero_probability():
    P = np.diag([0.0, 1.0])
    rho = DensityMatrix.diag([1, 0, 0, 0], (2, 2))
    with pytest.raises(UndefinedConditionalError):
        conditional_state(rho, P, measured=1)


def test_conditional_rejects_non_projector():
    with pytest.raises(StateError):
        conditional_state(BELL, np.diag([0.5, 0.5]), measured=1)


# ---------------------------------------------------------------------------
# mutual information and discord


def test_mutual_information_examples():
    assert mutual_information(BELL) == pytest.approx(2.0, abs=1e-12)
    assert mutual_information(DensityMatrix.diag([0.5, 0, 0, 0.5], (2, 2))) == pytest.approx(1.0, abs=1e-12)
    prod = PureState(np.kron([0.6, 0.8], [0.8, 0.6]).astype(complex), (2, 2))
    assert mutual_information(prod) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 4), st.integers(2, 4))
def test_mutual_information_bounds(seed, dA, dB):
    rng = np.random.default_rng(seed)
    rho = DensityMatrix(random_density(rng, dA * dB), (dA, dB))
    I = mutual_information(rho)
    hA = von_neumann_entropy(partial_trace(rho, [0]))
    hB = von_neumann_entropy(partial_trace(rho, [1]))
    assert -1e-10 <= I <= 2 * min(hA, hB) + 1e-10
    psi = PureState(random_pure(rng, dA * dB), (dA, dB))
    assert mutual_information(psi) == pytest.approx(mutual_information(psi.density()), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 4))
def test_decohered_information_bound(seed, N):
    a = random_pure(np.random.default_rng(seed), N)
    rho = _decohered(N, a)
    I = mutual_information(rho)
    hS = von_neumann_entropy(partial_trace(rho, [0]))
    hA = von_neumann_entropy(partial_trace(rho, [1]))
    assert I <= min(hS, hA) + 1e-10


def test_discord_classical_state_vanishes():
    rho = DensityMatrix.diag([0.2, 0, 0, 0.8], (2, 2))
    assert discord(rho, 1, np.eye(2)) == pytest.approx(0.0, abs=1e-10)
    assert discord(rho, 1, "optimize") == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("basis", [np.eye(2), H2, "optimize"])
def test_discord_bell_is_one_bit(basis):
    assert discord(BELL, 1, basis) == pytest.approx(1.0, abs=1e-6)
    assert classical_correlation(BELL, 1, basis) == pytest.approx(1.0, abs=1e-6)


def test_discord_decohered_conjugate_basis_equals_I():
    rho = _decohered(2, [math.sqrt(0.3), math.sqrt(0.7)])
    I = mutual_information(rho)
    assert discord(rho, 1, H2) == pytest.approx(I, abs=1e-10)


def test_discord_optimizer_matches_brute_grid():
    rng = np.random.default_rng(11)
    for _ in range(3):
        rho = random_density(rng, 4, rank=2)
        ours = discord(DensityMatrix(rho, (2, 2)), 1, "optimize")
        ref = brute_discord_qubit(rho)
        assert ours <= ref + 1e-9
        assert ours == pytest.approx(ref, abs=2e-3)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_discord_non_negative(seed):
    rho = DensityMatrix(random_density(np.random.default_rng(seed), 4), (2, 2))
    assert discord(rho, 1, "optimize") >= -1e-6


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(2, 3), st.integers(2, 3))
def test_discord_zero_on_product_basis_diagonal(seed, dS, dA):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(dS * dA))
    rho = DensityMatrix.diag(p, (dS, dA))
    assert discord(rho, 1, np.eye(dA)) == pytest.approx(0.0, abs=1e-9)
    assert discord(rho, 1, "optimize") == pytest.approx(0.0, abs=1e-6)
