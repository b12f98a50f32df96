"""Channel adversaries: what Eve does to the travel photons between pair
preparation and the sender's receipt confirmation, the records she keeps,
and the inference rule she applies to the public announcements afterwards.

Every strategy acts group by group and touches only travel photons and
qubits Eve creates herself, never the receiver's kept photons.  Qubits Eve
injects take fresh ids; a group's travel slots are re-pointed at whatever
she forwards, matching the fact that the honest parties identify photons
by arrival order, not provenance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, unique

import numpy as np

from . import qcore
from .bellmap import EncodingOp, apply_encoding, invert_encoding
from .protocol import CheckingAnnouncement, EncodingAnnouncement, Group, Register
from .qcore import BellKind


@unique
class AttackStrategy(Enum):
    NONE = "none"
    INTERCEPT_MEASURE_RESEND = "measure-resend"
    REPLACE_MEASURE_AFTER = "replace-after"
    REPLACE_MEASURE_BEFORE = "replace-before"
    ANCILLA_PASSIVE = "ancilla-passive"
    ANCILLA_CORRECTIVE = "ancilla-corrective"

    @classmethod
    def from_name(cls, name: str) -> "AttackStrategy":
        try:
            return cls(name)
        except ValueError:
            known = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown strategy {name!r}; expected one of {known}") from None


# The sign-flip op restores the checking correlations broken by the two
# minus outcomes of the ancilla measurement; no other single coding op
# does (verified by brute force in the test suite).
CORRECTIVE_OP = EncodingOp.U1
CORRECTION_TRIGGER = frozenset({BellKind.PSI_MINUS, BellKind.PHI_MINUS})


@dataclass
class EveMemory:
    """Eve's session-local records; never reads honest private outcomes."""

    strategy: AttackStrategy
    applied: bool = False
    travel_outcomes: dict[int, BellKind] = field(default_factory=dict)
    cross_outcomes: dict[int, tuple[BellKind, BellKind]] = field(default_factory=dict)
    ancilla_outcomes: dict[int, BellKind] = field(default_factory=dict)
    ancilla_qubits: dict[int, tuple[int, int]] = field(default_factory=dict)
    kept_replacement: dict[int, tuple[int, int]] = field(default_factory=dict)
    kept_originals: dict[int, tuple[int, int]] = field(default_factory=dict)
    replacement_outcomes: dict[int, BellKind] = field(default_factory=dict)
    corrections: dict[int, bool] = field(default_factory=dict)


def apply_attack(
    strategy: AttackStrategy,
    register: Register,
    groups: list[Group],
    rng: np.random.Generator,
    memory: EveMemory,
) -> Register:
    """Interpose ``strategy`` on the travel channel, once per session."""
    if memory.applied:
        raise RuntimeError("attack already applied in this session")
    memory.applied = True
    if strategy is AttackStrategy.NONE:
        return register

    for g in sorted(groups, key=lambda g: g.index):
        t1, t2 = g.alice_qubits
        if strategy is AttackStrategy.INTERCEPT_MEASURE_RESEND:
            # Measure the travel pair, then forward a fresh pair prepared
            # in the observed state.
            kind = register.measure_bell(t1, t2, rng)
            memory.travel_outcomes[g.index] = kind
            fresh = register.allocate(2)
            register.add(qcore.make_bell(kind, *fresh))
            g.alice_qubits = fresh
        elif strategy in (
            AttackStrategy.REPLACE_MEASURE_AFTER,
            AttackStrategy.REPLACE_MEASURE_BEFORE,
        ):
            # Substitute halves of Eve's own plus-type pairs for the
            # travel photons; she keeps the other halves and the originals.
            k1, f1, k2, f2 = register.allocate(4)
            register.add(qcore.make_bell(BellKind.PSI_PLUS, k1, f1))
            register.add(qcore.make_bell(BellKind.PSI_PLUS, k2, f2))
            memory.kept_originals[g.index] = (t1, t2)
            g.alice_qubits = (f1, f2)
            if strategy is AttackStrategy.REPLACE_MEASURE_BEFORE:
                # Immediately swap each kept half against the matching
                # intercepted photon.
                e1 = register.measure_bell(k1, t1, rng)
                e2 = register.measure_bell(k2, t2, rng)
                memory.cross_outcomes[g.index] = (e1, e2)
            else:
                memory.kept_replacement[g.index] = (k1, k2)
        elif strategy in (AttackStrategy.ANCILLA_PASSIVE, AttackStrategy.ANCILLA_CORRECTIVE):
            a1, a2 = register.allocate(2)
            register.add(qcore.single_qubit(a1))
            register.add(qcore.single_qubit(a2))
            register.apply_cnot(t1, a1)
            register.apply_cnot(t2, a2)
            memory.ancilla_qubits[g.index] = (a1, a2)
            if strategy is AttackStrategy.ANCILLA_CORRECTIVE:
                kind = register.measure_bell(a1, a2, rng)
                memory.ancilla_outcomes[g.index] = kind
                corrected = kind in CORRECTION_TRIGGER
                if corrected:
                    register.apply_single(t1, CORRECTIVE_OP.matrix)
                memory.corrections[g.index] = corrected
        else:
            raise ValueError(f"unhandled strategy {strategy}")
    return register


def finalize_attack(
    strategy: AttackStrategy,
    register: Register,
    groups: list[Group],
    memory: EveMemory,
    rng: np.random.Generator,
) -> None:
    """Eve's deferred measurements once the announcements are public."""
    if strategy is AttackStrategy.REPLACE_MEASURE_AFTER:
        for g in sorted(groups, key=lambda g: g.index):
            kept = memory.kept_replacement.get(g.index)
            if kept is not None:
                memory.replacement_outcomes[g.index] = register.measure_bell(*kept, rng)


def eve_guess_bits(
    memory: EveMemory,
    checking_announcements: list[CheckingAnnouncement],
    encoding_announcements: list[EncodingAnnouncement],
) -> dict[int, EncodingOp | None]:
    """Eve's per-group inference of the encoded op, or None to abstain.

    With a recorded Bell outcome that seeds the swapped correlation she can
    invert the announcement; without one she abstains.  The ancilla
    outcomes are not inverted: a lone ancilla kind does not determine the
    pre-coding travel kind, so those strategies abstain by contract.
    """
    guesses: dict[int, EncodingOp | None] = {}
    for ann in encoding_announcements:
        g = ann.group_index
        if (
            memory.strategy is AttackStrategy.INTERCEPT_MEASURE_RESEND
            and g in memory.travel_outcomes
        ):
            guesses[g] = invert_encoding(memory.travel_outcomes[g], ann.alice_outcome)
        elif (
            memory.strategy is AttackStrategy.REPLACE_MEASURE_AFTER
            and g in memory.replacement_outcomes
        ):
            guesses[g] = invert_encoding(
                memory.replacement_outcomes[g], ann.alice_outcome
            )
        else:
            guesses[g] = None
    return guesses
