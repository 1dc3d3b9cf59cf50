"""Service procurement: candidate shortlisting, reverse auctions for
machine components, alternating-offers negotiation for human
components, and all-or-nothing reservation of a whole system.

Machine components are priced by a sealed-bid second-price reverse
auction with the slot's max price as reserve.  Human components are
engaged through an alternating-offers protocol with time-dependent
concession and a hard round cap, since a human seller tires quickly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Tuple

from .events import EventLog
from .model import ComponentDescriptor, Nature, SlaTerms, SlotQuery
from .blueprint import BlueprintSpec, validate_blueprint
from .registry import ComponentPool, PoolEntry

__all__ = [
    "ContractState",
    "Contract",
    "ContractBook",
    "IllegalTransition",
    "AuctionResult",
    "NoQualifiedBidders",
    "NegotiationTactic",
    "NegotiationTranscript",
    "TimeDependentSeller",
    "SellerAgent",
    "InvalidBlueprint",
    "SystemContractSet",
    "InsufficiencyEscalation",
    "run_reverse_auction",
    "negotiate",
    "shortlist",
    "ProcurementAgent",
    "quantize_down",
    "quantize_up",
]

#: Capacity pinned per ordinary contract, msgs/s.
DEFAULT_CONTRACT_RATE = 1.0


class ContractState(str, Enum):
    PROPOSED = "proposed"
    RESERVED = "reserved"
    SERVING = "serving"
    DRAINING = "draining"
    COMPLETED = "completed"
    BREACHED = "breached"
    CANCELLED = "cancelled"
    SUPERSEDED = "superseded"


_LEGAL = {
    ContractState.PROPOSED: {ContractState.RESERVED, ContractState.CANCELLED},
    ContractState.RESERVED: {ContractState.SERVING, ContractState.CANCELLED},
    ContractState.SERVING: {
        ContractState.COMPLETED,
        ContractState.BREACHED,
        ContractState.SUPERSEDED,
        ContractState.DRAINING,
    },
    ContractState.DRAINING: {ContractState.SUPERSEDED},
    ContractState.COMPLETED: set(),
    ContractState.BREACHED: set(),
    ContractState.CANCELLED: set(),
    ContractState.SUPERSEDED: set(),
}

#: States that pin capacity on the component.
ACTIVE_STATES = frozenset(
    {ContractState.RESERVED, ContractState.SERVING, ContractState.DRAINING}
)


class IllegalTransition(Exception):
    pass


@dataclass
class Contract:
    contract_id: str
    component_id: str
    system_id: str
    slot_id: str
    terms: SlaTerms
    agreed_price: float
    created_at: int
    state: ContractState = ContractState.PROPOSED

    def snapshot(self) -> dict:
        return {
            "contract_id": self.contract_id,
            "component_id": self.component_id,
            "system_id": self.system_id,
            "slot_id": self.slot_id,
            "terms": self.terms.to_json(),
            "agreed_price": self.agreed_price,
            "created_at": self.created_at,
            "state": self.state.value,
        }


class ContractBook:
    """All contracts of a run, with guarded lifecycle transitions.

    Transitions keep the pool's capacity accounting in sync: entering
    RESERVED pins the contract's rate, leaving the active states
    releases it.
    """

    def __init__(
        self,
        pool: ComponentPool,
        log: Optional[EventLog] = None,
        clock: Optional[Callable[[], int]] = None,
        rate: float = DEFAULT_CONTRACT_RATE,
    ):
        self.pool = pool
        self._log = log
        self._clock = clock or (lambda: 0)
        self.rate = rate
        self.contracts: Dict[str, Contract] = {}
        self._counter = 0

    def _emit(self, type: str, payload: dict) -> None:
        if self._log is not None:
            self._log.append(type, payload)

    def create(
        self,
        component_id: str,
        system_id: str,
        slot_id: str,
        terms: SlaTerms,
        agreed_price: float,
    ) -> Contract:
        self._counter += 1
        c = Contract(
            contract_id=f"c{self._counter:04d}",
            component_id=component_id,
            system_id=system_id,
            slot_id=slot_id,
            terms=terms,
            agreed_price=agreed_price,
            created_at=self._clock(),
        )
        self.contracts[c.contract_id] = c
        self.pool.note_contract(component_id, c.contract_id, c.state.value, terms.term)
        self._emit("ContractProposed", c.snapshot())
        return c

    def transition(self, contract_id: str, new_state: ContractState) -> Contract:
        c = self.contracts[contract_id]
        if new_state not in _LEGAL[c.state]:
            raise IllegalTransition(f"{contract_id}: {c.state.value} -> {new_state.value}")
        was_active = c.state in ACTIVE_STATES
        if new_state is ContractState.RESERVED:
            self.pool.allocate(c.component_id, self.rate, c.contract_id)
        c.state = new_state
        if was_active and new_state not in ACTIVE_STATES:
            self.pool.release(c.component_id, c.contract_id)
        self.pool.note_contract(c.component_id, c.contract_id, new_state.value, c.terms.term)
        self._emit(
            "ContractState",
            {"contract_id": contract_id, "state": new_state.value},
        )
        return c

    def for_system(self, system_id: str) -> List[Contract]:
        return [c for c in self.contracts.values() if c.system_id == system_id]

    def snapshot(self) -> dict:
        return {cid: self.contracts[cid].snapshot() for cid in sorted(self.contracts)}


# ---------------------------------------------------------------------------
# Reverse auction
# ---------------------------------------------------------------------------

class NoQualifiedBidders(Exception):
    pass


@dataclass(frozen=True)
class AuctionResult:
    winner: str
    payment: float
    qualified_bids: Tuple[Tuple[str, float], ...]

    def to_json(self) -> dict:
        return {
            "winner": self.winner,
            "payment": self.payment,
            "qualified_bids": [[cid, bid] for cid, bid in self.qualified_bids],
        }


def run_reverse_auction(bids: Sequence[Tuple[str, float]], reserve: float) -> AuctionResult:
    """Sealed-bid second-price reverse auction with a reserve.

    Winner is the lowest qualified bid (tie broken by lowest id); the
    payment is the second-lowest qualified bid, or the reserve when
    only one bid qualifies.
    """
    qualified = sorted(
        ((cid, bid) for cid, bid in bids if bid <= reserve),
        key=lambda b: (b[1], b[0]),
    )
    if not qualified:
        raise NoQualifiedBidders(f"no bids at or below reserve {reserve}")
    winner = qualified[0][0]
    payment = qualified[1][1] if len(qualified) > 1 else reserve
    return AuctionResult(winner=winner, payment=payment, qualified_bids=tuple(qualified))


# ---------------------------------------------------------------------------
# Alternating-offers negotiation
# ---------------------------------------------------------------------------

def quantize_down(price: float, grain: float) -> float:
    return math.floor(price / grain + 1e-9) * grain


def quantize_up(price: float, grain: float) -> float:
    return math.ceil(price / grain - 1e-9) * grain


@dataclass(frozen=True)
class NegotiationTactic:
    """Buyer-side concession behavior and utility weights."""

    beta: float = 1.0
    rounds: int = 5
    grain: float = 0.5
    w_price: float = 0.5
    w_quality: float = 0.5
    p_min: float = 0.0


class SellerAgent(Protocol):
    quality: float

    def planned_offer(self, k: int, rounds: int) -> float:
        """Price the seller would counter with at round k."""
        ...


@dataclass
class TimeDependentSeller:
    """Concedes from an opening demand toward a private reservation."""

    reservation: float
    start_price: float
    quality: float
    beta: float = 1.0
    grain: float = 0.5

    def planned_offer(self, k: int, rounds: int) -> float:
        if k >= rounds:
            return self.reservation
        frac = (k / rounds) ** (1.0 / self.beta)
        raw = self.reservation + (self.start_price - self.reservation) * (1.0 - frac)
        return max(self.reservation, quantize_up(raw, self.grain))


@dataclass(frozen=True)
class NegotiationTranscript:
    rounds: Tuple[Tuple[str, dict], ...]  # ("buyer"|"seller", {"price","quality"})
    agreed: Optional[dict]  # {"price","quality"} or None
    no_deal_reason: Optional[str]
    round_cap: int

    @property
    def agreement(self) -> bool:
        return self.agreed is not None

    def to_json(self) -> dict:
        return {
            "rounds": [[actor, offer] for actor, offer in self.rounds],
            "outcome": (
                {"agreement": self.agreed}
                if self.agreement
                else {"no_deal": self.no_deal_reason}
            ),
            "round_cap": self.round_cap,
        }


def negotiate(
    seller: SellerAgent,
    max_price: float,
    tactic: NegotiationTactic,
) -> NegotiationTranscript:
    """Alternating offers, buyer first, at most ``tactic.rounds`` rounds
    per side.

    Buyer price concession at round k follows
    ``p_min + (max_price - p_min) * (k/R) ** (1/beta)``, quantized to
    the grain; the final buyer offer is exactly the slot's max price.
    Each side accepts when the standing offer is at least as good (by
    its own utility) as its own next planned offer.
    """
    R = tactic.rounds
    quality = seller.quality

    def u_buyer(price: float) -> float:
        return tactic.w_quality * quality - tactic.w_price * (price / max_price)

    def u_seller(price: float) -> float:
        return tactic.w_price * (price / max_price) + tactic.w_quality * (1.0 - quality)

    def buyer_offer(k: int) -> float:
        if k >= R:
            return max_price
        raw = tactic.p_min + (max_price - tactic.p_min) * (k / R) ** (1.0 / tactic.beta)
        return min(max_price, quantize_down(raw, tactic.grain))

    rounds: List[Tuple[str, dict]] = []
    if R < 1:
        return NegotiationTranscript((), None, "round-cap-exhausted", R)

    prev_buyer = -math.inf
    prev_seller = math.inf
    for k in range(1, R + 1):
        b_k = max(prev_buyer, buyer_offer(k))
        prev_buyer = b_k
        rounds.append(("buyer", {"price": b_k, "quality": quality}))
        s_plan = min(prev_seller, seller.planned_offer(k, R))
        if u_seller(b_k) >= u_seller(s_plan):
            return NegotiationTranscript(
                tuple(rounds), {"price": b_k, "quality": quality}, None, R
            )
        prev_seller = s_plan
        rounds.append(("seller", {"price": s_plan, "quality": quality}))
        if k < R:
            b_next = max(prev_buyer, buyer_offer(k + 1))
            if u_buyer(s_plan) >= u_buyer(b_next):
                return NegotiationTranscript(
                    tuple(rounds), {"price": s_plan, "quality": quality}, None, R
                )
    return NegotiationTranscript(tuple(rounds), None, "round-cap-exhausted", R)


# ---------------------------------------------------------------------------
# Whole-system procurement
# ---------------------------------------------------------------------------

class InvalidBlueprint(Exception):
    def __init__(self, report):
        super().__init__(f"invalid blueprint: {list(report.codes)}")
        self.report = report


@dataclass(frozen=True)
class SystemContractSet:
    system_id: str
    contracts: Dict[str, Contract]  # slot_id -> contract
    total_price: float


@dataclass(frozen=True)
class InsufficiencyEscalation:
    """L3 notification: these slots could not be staffed."""

    system_id: str
    failed_slots: Tuple[str, ...]
    reasons: Dict[str, str]


def shortlist(pool: ComponentPool, query: SlotQuery) -> Tuple[List[PoolEntry], List[PoolEntry]]:
    """Registry query partitioned into (machine, human) candidates."""
    hits = pool.query(query)
    machines = [e for e in hits if e.descriptor.nature is Nature.MACHINE]
    humans = [e for e in hits if e.descriptor.nature is Nature.HUMAN]
    return machines, humans


class ProcurementAgent:
    """Front half of the service procurement layer.

    ``seller_factory`` builds the negotiation counterpart for a human
    pool entry; by default a time-dependent seller opening at the slot
    max price and holding the posted price as reservation.
    ``commit_hook`` is a test seam invoked before each reservation
    commit; it may raise to simulate a failed commit.
    """

    def __init__(
        self,
        pool: ComponentPool,
        book: ContractBook,
        log: Optional[EventLog] = None,
        tactic: NegotiationTactic = NegotiationTactic(),
        seller_factory: Optional[Callable[[PoolEntry, SlotQuery], SellerAgent]] = None,
        commit_hook: Optional[Callable[[str, Contract], None]] = None,
    ):
        self.pool = pool
        self.book = book
        self._log = log
        self.tactic = tactic
        self.seller_factory = seller_factory or self._default_seller
        self.commit_hook = commit_hook

    @staticmethod
    def _default_seller(entry: PoolEntry, query: SlotQuery) -> TimeDependentSeller:
        terms = entry.descriptor.posted_terms
        return TimeDependentSeller(
            reservation=terms.price,
            start_price=max(query.max_price, terms.price),
            quality=terms.min_quality,
        )

    def _emit(self, type: str, payload: dict) -> None:
        if self._log is not None:
            self._log.append(type, payload)

    def procure_system(self, b: BlueprintSpec) -> SystemContractSet | InsufficiencyEscalation:
        report = validate_blueprint(b)
        if report:
            raise InvalidBlueprint(report)

        picked: Dict[str, Tuple[PoolEntry, float, float]] = {}  # slot -> (entry, price, quality)
        failed: Dict[str, str] = {}
        for slot in b.slots:
            choice = self._select_for_slot(b.system_id, slot.slot_id, slot.query)
            if choice is None:
                failed[slot.slot_id] = "no-agreed-candidate"
            else:
                picked[slot.slot_id] = choice

        total = sum(price for _, price, _ in picked.values())
        if not failed and b.budget is not None and total > b.budget + 1e-9:
            # Walk slots in declaration order; the ones that push the
            # running total over budget are the failing ones.
            running = 0.0
            for slot in b.slots:
                _, price, _ = picked[slot.slot_id]
                running += price
                if running > b.budget + 1e-9:
                    failed[slot.slot_id] = "over-budget"

        if failed:
            esc = InsufficiencyEscalation(
                system_id=b.system_id,
                failed_slots=tuple(s.slot_id for s in b.slots if s.slot_id in failed),
                reasons=failed,
            )
            self._emit(
                "InsufficiencyEscalation",
                {"system_id": b.system_id, "failed_slots": list(esc.failed_slots),
                 "reasons": esc.reasons},
            )
            return esc

        # All-or-nothing commit: propose everything, then reserve; any
        # failure cancels the whole attempt.
        created: List[Contract] = []
        try:
            for slot in b.slots:
                entry, price, quality = picked[slot.slot_id]
                terms = replace(
                    entry.descriptor.posted_terms,
                    price=price,
                    min_quality=max(quality, slot.query.min_quality),
                    term=slot.query.term,
                )
                c = self.book.create(
                    entry.descriptor.id, b.system_id, slot.slot_id, terms, price
                )
                created.append(c)
            for c in created:
                if self.commit_hook is not None:
                    self.commit_hook(c.slot_id, c)
                self.book.transition(c.contract_id, ContractState.RESERVED)
        except Exception:
            bad_slots = []
            for c in created:
                if c.state in (ContractState.PROPOSED, ContractState.RESERVED):
                    self.book.transition(c.contract_id, ContractState.CANCELLED)
                bad_slots.append(c.slot_id)
            esc = InsufficiencyEscalation(
                system_id=b.system_id,
                failed_slots=tuple(s.slot_id for s in b.slots),
                reasons={"*": "commit-failed"},
            )
            self._emit(
                "InsufficiencyEscalation",
                {"system_id": b.system_id, "failed_slots": list(esc.failed_slots),
                 "reasons": esc.reasons},
            )
            return esc

        return SystemContractSet(
            system_id=b.system_id,
            contracts={c.slot_id: c for c in created},
            total_price=total,
        )

    def _select_for_slot(
        self, system_id: str, slot_id: str, query: SlotQuery
    ) -> Optional[Tuple[PoolEntry, float, float]]:
        machines, humans = shortlist(self.pool, query)

        machine_pick: Optional[Tuple[PoolEntry, float, float]] = None
        if machines:
            bids = [(e.descriptor.id, e.descriptor.posted_terms.price) for e in machines]
            result = run_reverse_auction(bids, reserve=query.max_price)
            winner = next(e for e in machines if e.descriptor.id == result.winner)
            machine_pick = (
                winner,
                result.payment,
                winner.descriptor.posted_terms.min_quality,
            )
            self._emit(
                "AuctionHeld",
                {"system_id": system_id, "slot_id": slot_id, **result.to_json()},
            )

        human_pick: Optional[Tuple[PoolEntry, float, float]] = None
        if humans:
            candidate = humans[0]  # best by query ordering
            seller = self.seller_factory(candidate, query)
            transcript = negotiate(seller, query.max_price, self.tactic)
            self._emit(
                "NegotiationHeld",
                {
                    "system_id": system_id,
                    "slot_id": slot_id,
                    "component_id": candidate.descriptor.id,
                    **transcript.to_json(),
                },
            )
            if transcript.agreement:
                human_pick = (
                    candidate,
                    transcript.agreed["price"],
                    transcript.agreed["quality"],
                )

        if machine_pick is None and human_pick is None:
            return None
        if human_pick is None:
            return machine_pick
        if machine_pick is None:
            return human_pick
        # Cheaper agreed option wins; ties prefer the machine, then
        # the lower component id.
        if human_pick[1] < machine_pick[1]:
            return human_pick
        return machine_pick
