"""Dense state-vector engine for small registers of labeled qubits.

Conventions, fixed once so every amplitude table in docs and tests is
unambiguous:

* A register's qubit tuple is most-significant-first: for qubits
  ``(a, b, c)`` the amplitude at index ``0b011`` belongs to
  ``|0>_a |1>_b |1>_c``.
* ``|0>`` is horizontal and ``|1>`` vertical polarization.
* A Bell measurement of the pair ``(a, b)`` treats ``a`` as the first
  tensor factor, which pins the sign of the antisymmetric outcomes.
* State comparison is phase-insensitive: the coding unitaries move Bell
  states onto each other only up to a global sign that depends on which
  photon of the pair they hit.

States are values: every operation returns a fresh ``StateVector`` and
nothing here mutates or locks, so states can be moved freely between
threads.  Measured qubits are removed from the register instead of being
kept as classical flags, which keeps multi-stage eavesdropping scenarios
inside the register cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, unique
from functools import lru_cache

import numpy as np

NORM_TOL = 1e-9

# Register cap; composing past it raises.  Sessions that would exceed it
# keep their groups in separate factors instead (see protocol.Register).
MAX_QUBITS = 12

_MIN_BRANCH_PROB = 1e-12


class QubitError(ValueError):
    """Unknown, duplicate, or capacity-violating qubit ids."""


@unique
class BellKind(Enum):
    """The four maximally entangled two-qubit states."""

    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"

    def __repr__(self) -> str:
        return f"BellKind({self.value!r})"


BELL_KINDS = (
    BellKind.PHI_PLUS,
    BellKind.PHI_MINUS,
    BellKind.PSI_PLUS,
    BellKind.PSI_MINUS,
)

_INV_SQRT2 = 1.0 / math.sqrt(2.0)

# Amplitude of |xy> in each Bell state; row = first qubit, column = second.
_BELL_MATRIX = {
    BellKind.PHI_PLUS: np.array([[_INV_SQRT2, 0.0], [0.0, _INV_SQRT2]], dtype=complex),
    BellKind.PHI_MINUS: np.array([[_INV_SQRT2, 0.0], [0.0, -_INV_SQRT2]], dtype=complex),
    BellKind.PSI_PLUS: np.array([[0.0, _INV_SQRT2], [_INV_SQRT2, 0.0]], dtype=complex),
    BellKind.PSI_MINUS: np.array([[0.0, _INV_SQRT2], [-_INV_SQRT2, 0.0]], dtype=complex),
}

# Conjugated Bell basis as one 4x4 block: row = kind, column = |xy> index.
_BELL_BRA = np.stack([_BELL_MATRIX[k].reshape(-1) for k in BELL_KINDS]).conj()

# The four single-photon coding operations.
U0 = np.eye(2, dtype=complex)
U1 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
U2 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
U3 = np.array([[0.0, -1.0], [1.0, 0.0]], dtype=complex)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitude vector over an ordered tuple of qubit ids."""

    qubits: tuple[int, ...]
    amps: np.ndarray

    def __post_init__(self) -> None:
        qubits = tuple(int(q) for q in self.qubits)
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        if len(set(qubits)) != len(qubits):
            raise QubitError(f"duplicate qubit ids in {qubits}")
        if len(qubits) > MAX_QUBITS:
            raise QubitError(f"{len(qubits)} qubits exceeds the register cap of {MAX_QUBITS}")
        if amps.shape[0] != 2 ** len(qubits):
            raise ValueError(f"{amps.shape[0]} amplitudes do not fit {len(qubits)} qubits")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm squared is {norm}, not 1")
        if amps.flags.writeable:
            amps = amps.copy()
            amps.flags.writeable = False
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "amps", amps)

    @property
    def n(self) -> int:
        return len(self.qubits)

    def index_of(self, q: int) -> int:
        try:
            return self.qubits.index(q)
        except ValueError:
            raise QubitError(f"qubit {q} is not in register {self.qubits}") from None

    def tensor(self) -> np.ndarray:
        return self.amps.reshape((2,) * self.n)


def _trusted(qubits: tuple[int, ...], amps: np.ndarray) -> StateVector:
    """Construct without re-validating; amps must be fresh and normalized."""
    sv = object.__new__(StateVector)
    amps.flags.writeable = False
    object.__setattr__(sv, "qubits", qubits)
    object.__setattr__(sv, "amps", amps)
    return sv


@dataclass(frozen=True)
class Branch:
    """One outcome of a Bell measurement: probability, collapsed rest, kind."""

    prob: float
    state: StateVector
    pair: tuple[int, int]
    kind: BellKind


def _unit_norm(amps: np.ndarray) -> np.ndarray:
    norm = float(np.vdot(amps, amps).real)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"operation broke normalization: norm squared {norm}")
    return amps


@lru_cache(maxsize=None)
def make_bell(kind: BellKind, a: int, b: int) -> StateVector:
    """Two-qubit Bell state of ``kind`` on the ordered pair ``(a, b)``."""
    if a == b:
        raise QubitError(f"bell pair needs two distinct qubits, got {a} twice")
    return StateVector((int(a), int(b)), _BELL_MATRIX[kind].reshape(-1).copy())


@lru_cache(maxsize=None)
def single_qubit(q: int, bit: int = 0) -> StateVector:
    """Fresh qubit prepared in |0> or |1>."""
    amps = np.zeros(2, dtype=complex)
    amps[bit] = 1.0
    return StateVector((int(q),), amps)


def compose(s1: StateVector, s2: StateVector) -> StateVector:
    """Tensor product; qubit order is s1's followed by s2's."""
    shared = set(s1.qubits) & set(s2.qubits)
    if shared:
        raise QubitError(f"qubit sets overlap on {sorted(shared)}")
    if s1.n + s2.n > MAX_QUBITS:
        raise QubitError(f"{s1.n + s2.n} qubits exceeds the register cap of {MAX_QUBITS}")
    amps = (s1.amps[:, None] * s2.amps[None, :]).reshape(-1)
    return _trusted(s1.qubits + s2.qubits, amps)


def apply_single(state: StateVector, q: int, op: np.ndarray) -> StateVector:
    """Apply a 2x2 unitary to qubit ``q``."""
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise ValueError(f"single-qubit operator must be 2x2, got {op.shape}")
    i = state.index_of(q)
    arr = np.tensordot(op, state.tensor(), axes=([1], [i]))
    arr = np.moveaxis(arr, 0, i)
    return _trusted(state.qubits, _unit_norm(np.ascontiguousarray(arr).reshape(-1)))


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    """Flip ``target`` on the control=1 subspace."""
    if control == target:
        raise QubitError("control and target must differ")
    ic, it = state.index_of(control), state.index_of(target)
    arr = state.tensor().copy()
    sl = [slice(None)] * state.n
    sl[ic] = 1
    axis = it - 1 if it > ic else it
    arr[tuple(sl)] = np.flip(arr[tuple(sl)], axis=axis)
    return _trusted(state.qubits, arr.reshape(-1))


def _pair_projections(
    state: StateVector, a: int, b: int
) -> tuple[tuple[int, ...], np.ndarray, np.ndarray]:
    """Project onto the Bell basis of ``(a, b)``.

    Returns the remaining qubit order, a (4, rest) array of unnormalized
    collapsed vectors indexed like BELL_KINDS, and the 4 probabilities.
    """
    if a == b:
        raise QubitError("cannot Bell-measure a qubit against itself")
    ia, ib = state.index_of(a), state.index_of(b)
    arr = np.moveaxis(state.tensor(), (ia, ib), (0, 1)).reshape(4, -1)
    rest = tuple(q for q in state.qubits if q != a and q != b)
    projected = _BELL_BRA @ arr
    probs = np.einsum("ij,ij->i", projected.conj(), projected).real
    return rest, projected, probs


def bell_branches(state: StateVector, a: int, b: int) -> list[Branch]:
    """All nonzero Bell-measurement outcomes for the pair ``(a, b)``.

    Each branch removes the measured pair from the register and carries a
    renormalized collapsed state; branch probabilities sum to 1.
    """
    rest, projected, probs = _pair_projections(state, a, b)
    total = float(probs.sum())
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"projection probabilities sum to {total}")
    branches = []
    for kind, vec, p in zip(BELL_KINDS, projected, probs):
        p = float(p)
        if p < _MIN_BRANCH_PROB:
            continue
        collapsed = _trusted(rest, vec / math.sqrt(p))
        branches.append(Branch(prob=p, state=collapsed, pair=(a, b), kind=kind))
    return branches


def sample_bell(
    state: StateVector, a: int, b: int, rng: np.random.Generator
) -> tuple[BellKind, StateVector]:
    """Draw one Bell outcome for ``(a, b)``; same seed, same sequence."""
    rest, projected, probs = _pair_projections(state, a, b)
    r = rng.random()
    acc = 0.0
    chosen = None
    for i, p in enumerate(probs):
        acc += float(p)
        if r < acc and p >= _MIN_BRANCH_PROB:
            chosen = i
            break
    if chosen is None:
        # float underflow at the top of the cumulative sum
        chosen = int(probs.argmax())
    p = float(probs[chosen])
    return BELL_KINDS[chosen], _trusted(rest, projected[chosen] / math.sqrt(p))


def overlap(s1: StateVector, s2: StateVector) -> complex:
    """Inner product <s1|s2> after aligning qubit order."""
    if set(s1.qubits) != set(s2.qubits):
        raise QubitError(f"qubit sets differ: {s1.qubits} vs {s2.qubits}")
    if s1.qubits == s2.qubits:
        aligned = s2.amps
    else:
        perm = [s2.qubits.index(q) for q in s1.qubits]
        aligned = np.transpose(s2.tensor(), perm).reshape(-1)
    return complex(np.vdot(s1.amps, aligned))


def equal_up_to_phase(s1: StateVector, s2: StateVector, tol: float = NORM_TOL) -> bool:
    """True iff the states agree up to a global phase."""
    return abs(overlap(s1, s2)) >= 1.0 - tol


def classify_bell(state: StateVector, tol: float = NORM_TOL) -> BellKind | None:
    """Bell kind of a two-qubit state, or None if it is not one."""
    if state.n != 2:
        raise QubitError(f"classification needs exactly 2 qubits, got {state.n}")
    for kind in BELL_KINDS:
        reference = make_bell(kind, *state.qubits)
        if abs(overlap(reference, state)) >= 1.0 - tol:
            return kind
    return None


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based deterministic generator keyed by (seed, stream).

    Stream indices split independent generators cheaply (one per Monte
    Carlo trial), so parallel trials stay reproducible without sharing
    state.
    """
    packed = np.array(
        [int(seed) % (1 << 64), int(stream) % (1 << 64)], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=packed))
