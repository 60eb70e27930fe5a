"""Three-particle decomposition of the subsystem hidden variables.

Subsystem is particle 0 (A); particles 1 (B) and 2 (C) are external. The
hidden variable for an ordered pair of subsystem paths equals the overlap of
the two-particle external evolutions conditioned on each path, and it is
rebuilt layer by layer out of three families of factors:

  delta  - booked at the layer of an A-B or A-C interaction, over pairs of
           external paths meeting at that interaction;
  gamma  - interactions of the struck particle's partner with the subsystem
           before the booking layer;
  chi    - B-C interactions feeding the struck particle.

Bookkeeping order inside a layer is B-C, then A-B, then A-C, so on the A-B
branch gamma sums stop at the previous layer while chi sums include the
booking layer; on the A-C branch both run through the booking layer. Layers
without the relevant gate contribute exact zeros (no arithmetic happens).

`hit_three`/`lambda_three` evaluate single pairs; `Lambda3Tables` runs the
same literal cascade vectorized over every path-prefix pair.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import Circuit, IDENTITY, make_circuit
from .common import DEFAULT_BUDGET, RealityError, check_budget
from .paths import Path, enumerate_paths

REALITY_TOL = 1e-10

AB, AC, BC = (0, 1), (0, 2), (1, 2)


def _require_three_particles(circuit: Circuit) -> None:
    if circuit.particles != 3:
        raise ValueError("three-particle decomposition needs exactly 3 particles")


def _thetas(circuit: Circuit, pair: tuple[int, int], t: int) -> np.ndarray | None:
    gate = circuit.phase(t, pair)
    return None if gate is None else np.asarray(gate.thetas).reshape(2, 2)


def _bare_amplitude(circuit: Circuit, particle: int, path: Path) -> complex:
    value = 1.0 + 0.0j
    for t in range(1, path.n + 1):
        value *= circuit.single(t, particle)[path.mode(t), path.mode(t - 1)]
    return value


def _straddle_phase(circuit: Circuit, pair: tuple[int, int], a: Path, b: Path, upto: int) -> float:
    """Accumulated angle of `pair` gates through layer `upto` along paths (a, b)."""
    angle = 0.0
    for t in range(1, upto + 1):
        th = _thetas(circuit, pair, t)
        if th is not None:
            angle += th[a.mode(t), b.mode(t)]
    return angle


def _b_state(circuit: Circuit, a_path: Path, c_path: Path, upto: int) -> np.ndarray:
    """Particle B's state after `upto` layers, conditioned on subsystem and C paths."""
    state = np.array([1.0, 0.0], dtype=complex)
    for s in range(1, upto + 1):
        state = circuit.single(s, 1) @ state
        th_bc = _thetas(circuit, BC, s)
        if th_bc is not None:
            state = np.exp(1j * th_bc[:, c_path.mode(s)]) * state
        th_ab = _thetas(circuit, AB, s)
        if th_ab is not None:
            state = np.exp(1j * th_ab[a_path.mode(s)]) * state
    return state


def _c_state(circuit: Circuit, a_path: Path, b_path: Path, upto: int) -> np.ndarray:
    """Particle C's state after `upto` layers, conditioned on subsystem and B paths."""
    state = np.array([1.0, 0.0], dtype=complex)
    for s in range(1, upto + 1):
        state = circuit.single(s, 2) @ state
        th_bc = _thetas(circuit, BC, s)
        if th_bc is not None:
            state = np.exp(1j * th_bc[b_path.mode(s)]) * state
        th_ac = _thetas(circuit, AC, s)
        if th_ac is not None:
            state = np.exp(1j * th_ac[a_path.mode(s)]) * state
    return state


def _check_common_endpoint(left: Path, right: Path) -> int:
    if left.n != right.n:
        raise ValueError("external paths must have equal length")
    if left.endpoint != right.endpoint:
        raise ValueError(f"external paths end at {left.endpoint} vs {right.endpoint}")
    return left.endpoint


def delta_ab(circuit: Circuit, p: Path, q: Path, m: Path, n_: Path, r: int) -> complex:
    """Booking factor of an A-B interaction at layer r over B-paths (m, n_)."""
    _require_three_particles(circuit)
    k = _check_common_endpoint(m, n_)
    th = _thetas(circuit, AB, r)
    if th is None:
        return 0j
    factor = np.exp(1j * (th[q.mode(r), k] - th[p.mode(r), k])) - 1.0
    cumulative = np.exp(
        1j
        * (
            _straddle_phase(circuit, AB, q, n_, r - 1)
            - _straddle_phase(circuit, AB, p, m, r - 1)
        )
    )
    return complex(
        factor * np.conj(_bare_amplitude(circuit, 1, m)) * _bare_amplitude(circuit, 1, n_) * cumulative
    )


def delta_ac(circuit: Circuit, p: Path, q: Path, s: Path, t_: Path, r: int) -> complex:
    """Booking factor of an A-C interaction at layer r over C-paths (s, t_)."""
    _require_three_particles(circuit)
    l = _check_common_endpoint(s, t_)
    th = _thetas(circuit, AC, r)
    if th is None:
        return 0j
    factor = np.exp(1j * (th[q.mode(r), l] - th[p.mode(r), l])) - 1.0
    cumulative = np.exp(
        1j
        * (
            _straddle_phase(circuit, AC, q, t_, r - 1)
            - _straddle_phase(circuit, AC, p, s, r - 1)
        )
    )
    return complex(
        factor * np.conj(_bare_amplitude(circuit, 2, s)) * _bare_amplitude(circuit, 2, t_) * cumulative
    )


def gamma_chi_b(
    circuit: Circuit, p: Path, q: Path, s: Path, t_: Path, t: int
) -> tuple[complex, complex]:
    """Layer-t split-off terms of particle B's conditioned overlap on the A-C branch.

    gamma carries the A-B phase difference, chi the B-C difference; both are
    exact zeros when the corresponding gate is absent at layer t.
    """
    _require_three_particles(circuit)
    _check_common_endpoint(s, t_)
    w_p = circuit.single(t, 1) @ _b_state(circuit, p, s, t - 1)
    w_q = circuit.single(t, 1) @ _b_state(circuit, q, t_, t - 1)

    th_bc = _thetas(circuit, BC, t)
    if th_bc is None:
        chi = 0j
        y_p, y_q = w_p, w_q
    else:
        d = np.exp(1j * (th_bc[:, t_.mode(t)] - th_bc[:, s.mode(t)])) - 1.0
        chi = complex(np.sum(d * w_p.conj() * w_q))
        y_p = np.exp(1j * th_bc[:, s.mode(t)]) * w_p
        y_q = np.exp(1j * th_bc[:, t_.mode(t)]) * w_q

    th_ab = _thetas(circuit, AB, t)
    if th_ab is None:
        gamma = 0j
    else:
        d = np.exp(1j * (th_ab[q.mode(t)] - th_ab[p.mode(t)])) - 1.0
        gamma = complex(np.sum(d * y_p.conj() * y_q))
    return gamma, chi


def gamma_chi_c(
    circuit: Circuit, p: Path, q: Path, m: Path, n_: Path, t: int
) -> tuple[complex, complex]:
    """Layer-t split-off terms of particle C's conditioned overlap on the A-B branch."""
    _require_three_particles(circuit)
    _check_common_endpoint(m, n_)
    v_p = circuit.single(t, 2) @ _c_state(circuit, p, m, t - 1)
    v_q = circuit.single(t, 2) @ _c_state(circuit, q, n_, t - 1)

    th_bc = _thetas(circuit, BC, t)
    if th_bc is None:
        chi = 0j
        y_p, y_q = v_p, v_q
    else:
        d = np.exp(1j * (th_bc[n_.mode(t)] - th_bc[m.mode(t)])) - 1.0
        chi = complex(np.sum(d * v_p.conj() * v_q))
        y_p = np.exp(1j * th_bc[m.mode(t)]) * v_p
        y_q = np.exp(1j * th_bc[n_.mode(t)]) * v_q

    th_ac = _thetas(circuit, AC, t)
    if th_ac is None:
        gamma = 0j
    else:
        d = np.exp(1j * (th_ac[q.mode(t)] - th_ac[p.mode(t)])) - 1.0
        gamma = complex(np.sum(d * y_p.conj() * y_q))
    return gamma, chi


@dataclass(frozen=True)
class BranchTerm:
    """One (endpoint, left path, right path) contribution inside a hit."""

    endpoint: int
    left: Path
    right: Path
    delta: complex
    gamma_sum: complex
    chi_sum: complex

    @property
    def value(self) -> complex:
        return self.delta * (1.0 + self.gamma_sum + self.chi_sum)


@dataclass(frozen=True)
class HitBreakdown:
    """Everything booked at one layer: both branches and the resulting hit total."""

    layer: int
    ab_branch: tuple[BranchTerm, ...]
    ac_branch: tuple[BranchTerm, ...]
    total: complex


def hit_three(
    circuit: Circuit, p: Path, q: Path, r: int, budget: int = DEFAULT_BUDGET
) -> HitBreakdown:
    """Hit of information at layer r with its full per-branch breakdown."""
    _require_three_particles(circuit)
    if p.n != circuit.n or q.n != circuit.n:
        raise ValueError("subsystem paths must span every circuit layer")
    check_budget(4**r, budget, "branch path pairs")

    ab_terms: list[BranchTerm] = []
    if _thetas(circuit, AB, r) is not None:
        for k in (0, 1):
            paths_b = enumerate_paths(r, k)
            for m in paths_b:
                for n_ in paths_b:
                    delta = delta_ab(circuit, p, q, m, n_, r)
                    gamma_sum = 0j
                    chi_sum = 0j
                    for t in range(1, r + 1):
                        gamma, chi = gamma_chi_c(circuit, p, q, m, n_, t)
                        if t <= r - 1:
                            gamma_sum += gamma
                        chi_sum += chi
                    ab_terms.append(BranchTerm(k, m, n_, delta, gamma_sum, chi_sum))

    ac_terms: list[BranchTerm] = []
    if _thetas(circuit, AC, r) is not None:
        for l in (0, 1):
            paths_c = enumerate_paths(r, l)
            for s in paths_c:
                for t_ in paths_c:
                    delta = delta_ac(circuit, p, q, s, t_, r)
                    gamma_sum = 0j
                    chi_sum = 0j
                    for t in range(1, r + 1):
                        gamma, chi = gamma_chi_b(circuit, p, q, s, t_, t)
                        gamma_sum += gamma
                        chi_sum += chi
                    ac_terms.append(BranchTerm(l, s, t_, delta, gamma_sum, chi_sum))

    total = sum((term.value for term in ab_terms), 0j) + sum(
        (term.value for term in ac_terms), 0j
    )
    return HitBreakdown(layer=r, ab_branch=tuple(ab_terms), ac_branch=tuple(ac_terms), total=total)


@dataclass(frozen=True)
class Lambda3Entry:
    """Hidden-variable trajectory with the per-layer breakdowns that built it."""

    trajectory: tuple[complex, ...]
    breakdowns: tuple[HitBreakdown, ...]

    @property
    def final(self) -> complex:
        return self.trajectory[-1]


def lambda_three(
    circuit: Circuit, p: Path, q: Path, budget: int = DEFAULT_BUDGET
) -> Lambda3Entry:
    """Accumulate the full cascade for one ordered subsystem path pair."""
    value = 1.0 + 0.0j
    trajectory = [value]
    breakdowns = []
    for r in range(1, circuit.n + 1):
        breakdown = hit_three(circuit, p, q, r, budget)
        breakdowns.append(breakdown)
        value = value + breakdown.total
        trajectory.append(value)
    return Lambda3Entry(trajectory=tuple(trajectory), breakdowns=tuple(breakdowns))


def lambda_direct_three(circuit: Circuit, p: Path, q: Path) -> complex:
    """The same hidden variable as a conditioned two-particle evolution overlap."""
    from .paths import condition_on_paths

    state_p = condition_on_paths(circuit, {0: p}).state()
    state_q = condition_on_paths(circuit, {0: q}).state()
    return complex(np.vdot(state_p, state_q))


def _expand4(table: np.ndarray) -> np.ndarray:
    for axis in range(4):
        table = np.repeat(table, 2, axis=axis)
    return table


class Lambda3Tables:
    """The literal cascade, vectorized over every (subsystem, external) prefix pair.

    All arrays are indexed by prefix integers with modes packed
    most-significant-first, exactly like the two-particle tables.
    """

    def __init__(self, circuit: Circuit, budget: int = DEFAULT_BUDGET):
        _require_three_particles(circuit)
        if circuit.n < 1:
            raise ValueError("need at least one layer")
        check_budget(16**circuit.n, budget, "three-particle cascade table")
        self.circuit = circuit
        n = self.n = circuit.n

        lam = np.ones((1, 1), dtype=complex)
        self.lam: list[np.ndarray] = [lam]
        self.hit_tables: list[np.ndarray | None] = [None]

        cv = np.array([1.0, 0.0], dtype=complex).reshape(1, 1, 2)  # C given (A, B) prefixes
        bv = np.array([1.0, 0.0], dtype=complex).reshape(1, 1, 2)  # B given (A, C) prefixes
        uv = np.zeros((1, 4), dtype=complex)  # external pair state given A prefix
        uv[0, 0] = 1.0
        self.direct: list[np.ndarray] = [uv.conj() @ uv.T]

        gab = np.zeros((1, 1, 1, 1), dtype=complex)  # sum of gamma terms, A-B branch
        xab = np.zeros((1, 1, 1, 1), dtype=complex)  # sum of chi terms, A-B branch
        gac = np.zeros((1, 1, 1, 1), dtype=complex)
        xac = np.zeros((1, 1, 1, 1), dtype=complex)
        pab = np.ones((1, 1), dtype=complex)  # cumulative A-B straddle phases
        pac = np.ones((1, 1), dtype=complex)
        bamp = np.ones(1, dtype=complex)
        camp = np.ones(1, dtype=complex)
        blast = np.zeros(1, dtype=int)
        clast = np.zeros(1, dtype=int)

        for r in range(1, n + 1):
            size = 1 << r
            bit = np.arange(size) % 2
            th_ab = _thetas(circuit, AB, r)
            th_ac = _thetas(circuit, AC, r)
            th_bc = _thetas(circuit, BC, r)

            # expand carried tables to this layer's resolution before updating;
            # pab/pac keep their through-(r-1) content until after the assemblies
            gab, xab, gac, xac = _expand4(gab), _expand4(xab), _expand4(gac), _expand4(xac)
            pab = np.repeat(np.repeat(pab, 2, axis=0), 2, axis=1)
            pac = np.repeat(np.repeat(pac, 2, axis=0), 2, axis=1)

            # bare external path amplitudes now cover layers 1..r
            bamp = np.repeat(bamp, 2) * circuit.single(r, 1)[
                np.tile([0, 1], blast.shape[0]), np.repeat(blast, 2)
            ]
            blast = np.tile([0, 1], blast.shape[0])
            camp = np.repeat(camp, 2) * circuit.single(r, 2)[
                np.tile([0, 1], clast.shape[0]), np.repeat(clast, 2)
            ]
            clast = np.tile([0, 1], clast.shape[0])

            # conditioned external states through this layer's gate sequence
            z_c = np.tensordot(cv, circuit.single(r, 2), axes=([2], [1]))
            z_c = np.repeat(np.repeat(z_c, 2, axis=0), 2, axis=1)  # pre-B-C view
            if th_bc is not None:
                v_c = z_c * np.exp(1j * th_bc)[bit][None, :, :]  # after B-C, before A-C
            else:
                v_c = z_c
            z_b = np.tensordot(bv, circuit.single(r, 1), axes=([2], [1]))
            z_b = np.repeat(np.repeat(z_b, 2, axis=0), 2, axis=1)
            if th_bc is not None:
                w_b = z_b * np.exp(1j * th_bc.T)[bit][None, :, :]  # after B-C, before A-B
            else:
                w_b = z_b

            # per-layer gamma/chi increments (skipped entirely when the gate is absent)
            if th_bc is not None:
                d_m = np.exp(-1j * th_bc)[bit]
                d_n = np.exp(1j * th_bc)[bit]
                xab = xab + (
                    np.einsum("ml,pml,nl,qnl->pqmn", d_m, z_c.conj(), d_n, z_c, optimize=True)
                    - np.einsum("pml,qnl->pqmn", z_c.conj(), z_c, optimize=True)
                )
                d_s = np.exp(-1j * th_bc.T)[bit]
                d_t = np.exp(1j * th_bc.T)[bit]
                xac = xac + (
                    np.einsum("sk,psk,tk,qtk->pqst", d_s, z_b.conj(), d_t, z_b, optimize=True)
                    - np.einsum("psk,qtk->pqst", z_b.conj(), z_b, optimize=True)
                )
            if th_ab is not None:
                d_p = np.exp(-1j * th_ab)[bit]
                d_q = np.exp(1j * th_ab)[bit]
                gac = gac + (
                    np.einsum("pk,psk,qk,qtk->pqst", d_p, w_b.conj(), d_q, w_b, optimize=True)
                    - np.einsum("psk,qtk->pqst", w_b.conj(), w_b, optimize=True)
                )

            hit_table = None
            if th_ab is not None:
                # A-B branch: gamma through r-1 (gab not yet updated), chi through r
                weight = 1.0 + gab + xab
                b_left = bamp[None, :] * pab
                hit_table = np.zeros((size, size), dtype=complex)
                d_p = np.exp(-1j * th_ab)[bit]
                d_q = np.exp(1j * th_ab)[bit]
                for k in (0, 1):
                    t_k = np.einsum(
                        "pm,qn,pqmn->pq",
                        b_left[:, k::2].conj(),
                        b_left[:, k::2],
                        weight[:, :, k::2, k::2],
                        optimize=True,
                    )
                    hit_table += (d_p[:, k][:, None] * d_q[None, :, k] - 1.0) * t_k

            if th_ac is not None:
                d_pv = np.exp(-1j * th_ac)[bit]
                d_qv = np.exp(1j * th_ac)[bit]
                gab = gab + (
                    np.einsum("pl,pml,ql,qnl->pqmn", d_pv, v_c.conj(), d_qv, v_c, optimize=True)
                    - np.einsum("pml,qnl->pqmn", v_c.conj(), v_c, optimize=True)
                )
                # A-C branch: gamma and chi both through r
                weight = 1.0 + gac + xac
                c_left = camp[None, :] * pac
                ac_table = np.zeros((size, size), dtype=complex)
                for l in (0, 1):
                    t_l = np.einsum(
                        "ps,qt,pqst->pq",
                        c_left[:, l::2].conj(),
                        c_left[:, l::2],
                        weight[:, :, l::2, l::2],
                        optimize=True,
                    )
                    ac_table += (d_pv[:, l][:, None] * d_qv[None, :, l] - 1.0) * t_l
                hit_table = ac_table if hit_table is None else hit_table + ac_table

            lam = np.repeat(np.repeat(lam, 2, axis=0), 2, axis=1)
            if hit_table is not None:
                lam = lam + hit_table
            self.lam.append(lam)
            self.hit_tables.append(hit_table)

            # straddle phases now cover layers 1..r, ready for the next layer's deltas
            if th_ab is not None:
                pab = pab * np.exp(1j * th_ab[bit[:, None], bit[None, :]])
            if th_ac is not None:
                pac = pac * np.exp(1j * th_ac[bit[:, None], bit[None, :]])

            # conditioned single-particle states after the full layer
            if th_ac is not None:
                cv = v_c * np.exp(1j * th_ac)[bit][:, None, :]
            else:
                cv = v_c
            if th_ab is not None:
                bv = w_b * np.exp(1j * th_ab)[bit][:, None, :]
            else:
                bv = w_b

            # direct external-pair states for the oracle-side tables
            op4 = np.kron(circuit.single(r, 1), circuit.single(r, 2))
            base = uv @ op4.T
            if th_bc is not None:
                base = base * np.exp(1j * np.asarray(th_bc).reshape(-1))[None, :]
            uv = np.repeat(base, 2, axis=0)
            if th_ab is not None:
                f_ab = np.exp(1j * th_ab[:, [0, 0, 1, 1]])
                uv = uv * np.tile(f_ab, ((1 << (r - 1)), 1))
            if th_ac is not None:
                f_ac = np.exp(1j * th_ac[:, [0, 1, 0, 1]])
                uv = uv * np.tile(f_ac, ((1 << (r - 1)), 1))
            self.direct.append(uv.conj() @ uv.T)

        # subsystem path amplitudes
        amps = np.ones(1, dtype=complex)
        last = np.zeros(1, dtype=int)
        for t in range(1, n + 1):
            gate_a = circuit.single(t, 0)
            amps = np.repeat(amps, 2) * gate_a[np.tile([0, 1], last.shape[0]), np.repeat(last, 2)]
            last = np.tile([0, 1], last.shape[0])
        self.amps = amps

    def endpoint_rows(self, endpoint: int) -> np.ndarray:
        return np.arange(1 << (self.n - 1)) * 2 + endpoint

    def lambda_final(self, endpoint: int) -> np.ndarray:
        rows = self.endpoint_rows(endpoint)
        return self.lam[self.n][np.ix_(rows, rows)]

    def prefix_index(self, path: Path, t: int) -> int:
        idx = 0
        for m in path.modes[:t]:
            idx = (idx << 1) | m
        return idx

    def trajectory(self, p: Path, q: Path) -> tuple[complex, ...]:
        return tuple(
            complex(self.lam[t][self.prefix_index(p, t), self.prefix_index(q, t)])
            for t in range(self.n + 1)
        )

    def marginal(self, endpoint: int) -> float:
        rows = self.endpoint_rows(endpoint)
        weights = self.lam[self.n][np.ix_(rows, rows)].copy()
        np.fill_diagonal(weights, 0.0)
        a = self.amps[rows]
        total = float(np.sum(np.abs(a) ** 2)) + complex(a.conj() @ weights @ a)
        if abs(total.imag) > REALITY_TOL:
            raise RealityError(f"pair sum has imaginary residue {total.imag:.3e}")
        return total.real


def lambda3_tables(circuit: Circuit, budget: int = DEFAULT_BUDGET) -> Lambda3Tables:
    return Lambda3Tables(circuit, budget)


def marginal_three(circuit: Circuit, endpoint: int, budget: int = DEFAULT_BUDGET) -> float:
    """Subsystem marginal from the vectorized three-particle cascade."""
    return lambda3_tables(circuit, budget).marginal(endpoint)


def remove_trailing_external_gate(circuit: Circuit, atol: float = 1e-12) -> Circuit:
    """Drop a final layer that acts only on external particles; subsystem marginals keep."""
    if circuit.n < 1:
        raise ValueError("circuit has no layers to remove")
    last = circuit.layers[-1]
    if any(0 in gate.pair for gate in last.phases):
        raise ValueError("final layer couples the subsystem via a phase gate")
    if np.max(np.abs(last.singles[0] - IDENTITY)) > atol:
        raise ValueError("final layer applies a non-identity gate to the subsystem")
    specs = [
        (dict(enumerate(layer.singles)), list(layer.phases)) for layer in circuit.layers[:-1]
    ]
    return make_circuit(circuit.particles, specs)
