"""Round-robin block production among permitted miners.

Eligibility is throttled by the mining-diversity parameter d: with M
permitted miners the window is ceil(d * M), and a miner that produced any of
the previous window-1 blocks may not produce the next one. Each block is
approved by a single validator, the next active miner after the proposer in
registration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import (
    BlockValidationError,
    ConsensusStalled,
    NoValidCandidate,
    SelfValidation,
    UnpermittedMiner,
)
from .ledger import (
    Block,
    Chain,
    Transaction,
    apply_block_grants,
    block_id,
    build_block,
    iter_chain_txs,
    sign_block,
    validate_block,
)
from .registry import Directory, Keyring, Right, Signature, sign_by_id


@dataclass(frozen=True)
class MinerSet:
    """Permitted miners in registration order; `active` marks who is up."""

    miners: tuple[bytes, ...]
    active: frozenset[bytes]

    @staticmethod
    def of(miners: Iterable[bytes], inactive: Iterable[bytes] = ()) -> "MinerSet":
        order = tuple(miners)
        if not order:
            raise ValueError("miner set may not be empty")
        down = set(inactive)
        return MinerSet(order, frozenset(m for m in order if m not in down))

    def is_active(self, miner: bytes) -> bool:
        return miner in self.active


@dataclass(frozen=True)
class DiversityRule:
    diversity: Fraction

    def __post_init__(self) -> None:
        if not 0 <= self.diversity <= 1:
            raise ValueError("mining diversity must lie in [0, 1]")

    def window(self, miner_count: int) -> int:
        return math.ceil(self.diversity * miner_count)


def recent_window_miners(chain: Chain, window: int) -> tuple[bytes, ...]:
    """Producers of the last window-1 blocks; the genesis block never counts."""
    if window <= 1:
        return ()
    start = max(1, len(chain.blocks) - (window - 1))
    return tuple(block.header.miner for block in chain.blocks[start:])


def eligible_miners(chain: Chain, miners: MinerSet, rule: DiversityRule) -> set[bytes]:
    window = rule.window(len(miners.miners))
    recent = set(recent_window_miners(chain, window))
    return {m for m in miners.miners if m in miners.active and m not in recent}


def designated_proposer(height: int, miners: MinerSet, eligible: set[bytes]) -> bytes | None:
    """Round-robin pick for a height, scanning forward past ineligible miners."""
    if not eligible:
        return None
    count = len(miners.miners)
    start = (height - 1) % count
    for offset in range(count):
        candidate = miners.miners[(start + offset) % count]
        if candidate in eligible:
            return candidate
    return None


def designated_validator(proposer: bytes, miners: MinerSet) -> bytes | None:
    """The next active miner after the proposer in registration order."""
    count = len(miners.miners)
    start = miners.miners.index(proposer)
    for offset in range(1, count):
        candidate = miners.miners[(start + offset) % count]
        if candidate in miners.active:
            return candidate
    return None


@dataclass(frozen=True)
class Approval:
    height: int
    block_id: bytes
    validator: bytes
    signature: Signature


@dataclass(frozen=True)
class Rejection:
    height: int
    validator: bytes
    error: BlockValidationError


def approve_block(
    block: Block,
    validator: bytes,
    chain: Chain,
    *,
    miners: MinerSet,
    rule: DiversityRule,
    directory: Directory,
    keyring: Keyring,
) -> Approval | Rejection:
    """Single-validator approval of a proposed block extending the chain tip."""
    if validator == block.header.miner:
        raise SelfValidation("a proposer may not validate its own block")
    if validator not in miners.miners or not directory.has_right(validator, Right.MINE):
        raise UnpermittedMiner("validator does not hold the mine right")
    window = rule.window(len(miners.miners))
    try:
        validate_block(
            block,
            chain.tip,
            miners=miners.miners,
            directory=directory,
            recent_miners=recent_window_miners(chain, window),
        )
    except BlockValidationError as exc:
        return Rejection(block.header.height, validator, exc)
    signature = sign_by_id(keyring, directory, validator, block_id(block))
    return Approval(block.header.height, block_id(block), validator, signature)


def fork_choice(candidates: Sequence[Chain]) -> Chain:
    """Longest chain wins; equal lengths fall back to the smaller tip digest."""
    if not candidates:
        raise NoValidCandidate("no candidate chains supplied")
    return min(candidates, key=lambda chain: (-len(chain.blocks), block_id(chain.tip)))


class ConsensusEngine:
    """Synchronous propose/validate/commit path over an in-memory chain.

    The simulator spreads the same steps over ticks; library callers get the
    whole round in one call. Nonces are allocated per author, seeded from the
    chain the engine first sees for that author.
    """

    def __init__(
        self,
        directory: Directory,
        keyring: Keyring,
        miner_ids: Sequence[bytes],
        rule: DiversityRule,
    ) -> None:
        self.directory = directory
        self.keyring = keyring
        self.miner_order = tuple(miner_ids)
        self.rule = rule
        self._down: set[bytes] = set()
        self._nonces: dict[bytes, int] = {}

    def set_active(self, miner: bytes, active: bool) -> None:
        if active:
            self._down.discard(miner)
        else:
            self._down.add(miner)

    def miner_set(self) -> MinerSet:
        return MinerSet.of(self.miner_order, inactive=self._down)

    def next_nonce(self, author: bytes, chain: Chain) -> int:
        if author not in self._nonces:
            top = -1
            for _, tx in iter_chain_txs(chain):
                if tx.author == author and tx.nonce > top:
                    top = tx.nonce
            self._nonces[author] = top + 1
        nonce = self._nonces[author]
        self._nonces[author] = nonce + 1
        return nonce

    def commit(
        self,
        chain: Chain,
        transactions: Sequence[Transaction],
        timestamp: int | None = None,
    ) -> Chain:
        """Produce, approve and append one block; raises ConsensusStalled when
        the diversity window leaves no eligible proposer or no validator is up."""
        miners = self.miner_set()
        eligible = eligible_miners(chain, miners, self.rule)
        proposer = designated_proposer(chain.height + 1, miners, eligible)
        if proposer is None:
            raise ConsensusStalled(f"no eligible miner at height {chain.height + 1}")
        validator = designated_validator(proposer, miners)
        if validator is None:
            raise ConsensusStalled("no active validator available")
        if timestamp is None:
            timestamp = chain.tip.header.timestamp + 1
        block = sign_block(
            build_block(chain.tip, transactions, proposer, timestamp),
            self.keyring,
            self.directory,
        )
        outcome = approve_block(
            block,
            validator,
            chain,
            miners=miners,
            rule=self.rule,
            directory=self.directory,
            keyring=self.keyring,
        )
        if isinstance(outcome, Rejection):
            raise outcome.error
        apply_block_grants(self.directory, block)
        return chain.append(block)
