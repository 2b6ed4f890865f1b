"""Block and transaction model, double-hashed Merkle roots, validation and
the canonical wire format.

Layout of an encoded block (all integers little-endian):

    header:   version u32 | prev_hash 32 | merkle_root 32 | height u64
              | timestamp u64 | miner 32
    block:    header | miner_signature (u16 len, scheme u8 + raw signature)
              | tx_count u32 | tx_count * (u32 len | transaction)
    tx:       kind u8 | author 32 | nonce u64 | author_signature
              | payload u32 len | payload bytes

Decoding is strict: unknown tags, short buffers and leftover bytes are all
errors, so a byte sequence is valid for exactly one block. A block's id is
the double hash of its encoded header.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

from ._wire import Reader, Writer
from .errors import (
    BadCount,
    BadLink,
    BadMerkleRoot,
    BadSignature,
    BadTag,
    BlockValidationError,
    ChainValidationError,
    DiversityViolation,
    EmptyTransactionList,
    NonMonotonicTimestamp,
    UnpermittedMiner,
)
from .hashing import DIGEST_SIZE, ZERO_DIGEST, double_hash
from .registry import (
    Directory,
    Keyring,
    PermissionGrant,
    Right,
    Signature,
    sign_by_id,
    verify,
)

BLOCK_VERSION = 1

_VALID_SCHEMES = (0, 1)


class TxKind(enum.IntEnum):
    CLAIM_ATTESTATION = 0
    CONTRACT_RECORD = 1
    HR_EVENT_RECORD = 2
    PERMISSION_GRANT = 3


@dataclass(frozen=True)
class Transaction:
    kind: TxKind
    payload: object
    author: bytes
    author_signature: Signature
    nonce: int


@dataclass(frozen=True)
class BlockHeader:
    version: int
    prev_hash: bytes
    merkle_root: bytes
    height: int
    timestamp: int
    miner: bytes


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    tx_count: int
    transactions: tuple[Transaction, ...]
    miner_signature: Signature


@dataclass(frozen=True)
class Chain:
    blocks: tuple[Block, ...]

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return self.tip.header.height

    def append(self, block: Block) -> "Chain":
        return Chain(self.blocks + (block,))

    def __len__(self) -> int:
        return len(self.blocks)


# --- payload codecs -----------------------------------------------------------

_PAYLOAD_ENCODERS: dict[TxKind, Callable[[object], bytes]] = {}
_PAYLOAD_DECODERS: dict[TxKind, Callable[[bytes], object]] = {}


def register_payload_codec(
    kind: TxKind,
    encoder: Callable[[object], bytes],
    decoder: Callable[[bytes], object],
) -> None:
    _PAYLOAD_ENCODERS[kind] = encoder
    _PAYLOAD_DECODERS[kind] = decoder


def encode_payload(kind: TxKind, payload: object) -> bytes:
    try:
        return _PAYLOAD_ENCODERS[kind](payload)
    except KeyError:
        raise RuntimeError(f"no codec registered for {kind!r}") from None


def decode_payload(kind: TxKind, data: bytes) -> object:
    try:
        return _PAYLOAD_DECODERS[kind](data)
    except KeyError:
        raise RuntimeError(f"no codec registered for {kind!r}") from None


def _encode_grant(payload: object) -> bytes:
    assert isinstance(payload, PermissionGrant)
    if not payload.grants:
        raise ValueError("permission grant needs at least one entry")
    w = Writer()
    w.u32(len(payload.grants))
    for subject, rights in payload.grants:
        w.raw(subject)
        w.u8(int(rights))
    return w.getvalue()


def _decode_grant(data: bytes) -> PermissionGrant:
    r = Reader(data)
    count = r.u32()
    if count == 0:
        raise BadTag("permission grant with zero entries")
    grants = []
    for _ in range(count):
        subject = r.take(DIGEST_SIZE)
        mask = r.u8()
        if mask & ~0x0F:
            raise BadTag(f"unknown rights bits 0x{mask:02x}")
        grants.append((subject, Right(mask)))
    r.expect_end()
    return PermissionGrant(tuple(grants))


register_payload_codec(TxKind.PERMISSION_GRANT, _encode_grant, _decode_grant)


# --- signature wire -----------------------------------------------------------

def write_signature(w: Writer, signature: Signature) -> None:
    if signature.scheme_id not in _VALID_SCHEMES:
        raise ValueError(f"unknown scheme id {signature.scheme_id}")
    w.blob16(bytes([signature.scheme_id]) + signature.data)


def read_signature(r: Reader) -> Signature:
    blob = r.blob16()
    if len(blob) < 1:
        raise BadTag("signature blob missing scheme byte")
    scheme_id = blob[0]
    if scheme_id not in _VALID_SCHEMES:
        raise BadTag(f"unknown signature scheme {scheme_id}")
    return Signature(scheme_id, blob[1:])


# --- hashing ---------------------------------------------------------------------

def merkle_root(transactions: Sequence[Transaction]) -> bytes:
    """Root of the double-hash Merkle tree over the encoded transactions.

    A single leaf is its own root; a level of odd width duplicates its last
    node before pairing.
    """
    if not transactions:
        raise EmptyTransactionList("cannot build a merkle tree over nothing")
    level = [double_hash(encode_tx(tx)) for tx in transactions]
    while len(level) > 1:
        if len(level) % 2 == 1:
            level.append(level[-1])
        level = [double_hash(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def encode_header(header: BlockHeader) -> bytes:
    w = Writer()
    w.u32(header.version)
    w.raw(header.prev_hash)
    w.raw(header.merkle_root)
    w.u64(header.height)
    w.u64(header.timestamp)
    w.raw(header.miner)
    return w.getvalue()


def block_id(block: Block) -> bytes:
    return double_hash(encode_header(block.header))


def tx_signing_digest(kind: TxKind, author: bytes, nonce: int, payload_bytes: bytes) -> bytes:
    """Digest a transaction author signs: everything except the signature."""
    w = Writer()
    w.u8(int(kind))
    w.raw(author)
    w.u64(nonce)
    w.blob32(payload_bytes)
    return double_hash(w.getvalue())


def tx_id(tx: Transaction) -> bytes:
    return double_hash(encode_tx(tx))


# --- transaction / block codecs -----------------------------------------------------

def encode_tx(tx: Transaction) -> bytes:
    w = Writer()
    w.u8(int(tx.kind))
    w.raw(tx.author)
    w.u64(tx.nonce)
    write_signature(w, tx.author_signature)
    w.blob32(encode_payload(tx.kind, tx.payload))
    return w.getvalue()


def read_tx(r: Reader) -> Transaction:
    kind_byte = r.u8()
    try:
        kind = TxKind(kind_byte)
    except ValueError:
        raise BadTag(f"unknown transaction kind {kind_byte}") from None
    author = r.take(DIGEST_SIZE)
    nonce = r.u64()
    signature = read_signature(r)
    payload = decode_payload(kind, r.blob32())
    return Transaction(kind, payload, author, signature, nonce)


def decode_tx(data: bytes) -> Transaction:
    r = Reader(data)
    tx = read_tx(r)
    r.expect_end()
    return tx


def encode_block(block: Block) -> bytes:
    w = Writer()
    w.raw(encode_header(block.header))
    write_signature(w, block.miner_signature)
    w.u32(block.tx_count)
    for tx in block.transactions:
        w.blob32(encode_tx(tx))
    return w.getvalue()


def decode_block(data: bytes) -> Block:
    r = Reader(data)
    header = BlockHeader(
        version=r.u32(),
        prev_hash=r.take(DIGEST_SIZE),
        merkle_root=r.take(DIGEST_SIZE),
        height=r.u64(),
        timestamp=r.u64(),
        miner=r.take(DIGEST_SIZE),
    )
    signature = read_signature(r)
    tx_count = r.u32()
    transactions = tuple(decode_tx(r.blob32()) for _ in range(tx_count))
    r.expect_end()
    return Block(header, tx_count, transactions, signature)


# --- block construction --------------------------------------------------------------

def build_block(
    parent: Block,
    transactions: Sequence[Transaction],
    miner: bytes,
    timestamp: int,
) -> Block:
    """Assemble the next block on top of parent; unsigned until consensus signs."""
    if not transactions:
        raise EmptyTransactionList("a block needs at least one transaction")
    if timestamp < parent.header.timestamp:
        raise NonMonotonicTimestamp(
            f"timestamp {timestamp} precedes parent {parent.header.timestamp}"
        )
    txs = tuple(transactions)
    header = BlockHeader(
        version=BLOCK_VERSION,
        prev_hash=block_id(parent),
        merkle_root=merkle_root(txs),
        height=parent.header.height + 1,
        timestamp=timestamp,
        miner=miner,
    )
    return Block(header, len(txs), txs, Signature.empty())


def sign_block(block: Block, keyring: Keyring, directory: Directory) -> Block:
    signature = sign_by_id(keyring, directory, block.header.miner, block_id(block))
    return replace(block, miner_signature=signature)


def make_transaction(
    kind: TxKind,
    payload: object,
    author: bytes,
    nonce: int,
    keyring: Keyring,
    directory: Directory,
) -> Transaction:
    payload_bytes = encode_payload(kind, payload)
    digest = tx_signing_digest(kind, author, nonce, payload_bytes)
    signature = sign_by_id(keyring, directory, author, digest)
    return Transaction(kind, payload, author, signature, nonce)


def build_genesis(directory: Directory, keyring: Keyring, miners: Sequence[bytes]) -> Block:
    """The height-0 block: one permission grant that bootstraps the network.

    Every directory participant gets connect/send, the configured miners get
    mine, authority roles get attest. The first miner authors and signs it.
    """
    from .registry import AUTHORITY_ROLES

    if not miners:
        raise ValueError("genesis needs at least one miner")
    founder = miners[0]
    miner_set = set(miners)
    grants = []
    for participant in directory:
        rights = Right.CONNECT | Right.SEND
        if participant.id in miner_set:
            rights |= Right.MINE
        if participant.role in AUTHORITY_ROLES:
            rights |= Right.ATTEST
        grants.append((participant.id, rights))
    payload = PermissionGrant(tuple(grants))
    tx = make_transaction(TxKind.PERMISSION_GRANT, payload, founder, 0, keyring, directory)
    header = BlockHeader(
        version=BLOCK_VERSION,
        prev_hash=ZERO_DIGEST,
        merkle_root=merkle_root([tx]),
        height=0,
        timestamp=0,
        miner=founder,
    )
    block = Block(header, 1, (tx,), Signature.empty())
    return sign_block(block, keyring, directory)


def apply_block_grants(directory: Directory, block: Block, *, bootstrap: bool = False) -> None:
    for tx in block.transactions:
        if tx.kind is TxKind.PERMISSION_GRANT:
            for subject, rights in tx.payload.grants:
                directory.apply_grant(tx.author, subject, rights, bootstrap=bootstrap)


def rebuild_permissions(directory: Directory, chain: Chain) -> None:
    """Replay every grant on the chain; the genesis grant seeds the table."""
    directory.clear_grants()
    for block in chain.blocks:
        apply_block_grants(directory, block, bootstrap=block.header.height == 0)


# --- validation ------------------------------------------------------------------------

def _check_tx_signatures(block: Block, directory: Directory) -> None:
    for tx in block.transactions:
        author = directory.get(tx.author)
        if author is None:
            raise BadSignature(f"unknown transaction author {tx.author.hex()}")
        digest = tx_signing_digest(tx.kind, tx.author, tx.nonce, encode_payload(tx.kind, tx.payload))
        if not verify(author.public_key, digest, tx.author_signature):
            raise BadSignature("transaction author signature does not verify")


def validate_genesis(block: Block, directory: Directory) -> None:
    if block.header.height != 0 or block.header.prev_hash != ZERO_DIGEST:
        raise BadLink("genesis must sit at height 0 with a zero previous hash")
    if not block.transactions or block.tx_count != len(block.transactions):
        raise BadCount("genesis transaction count mismatch")
    if merkle_root(block.transactions) != block.header.merkle_root:
        raise BadMerkleRoot("genesis merkle root mismatch")
    miner = directory.get(block.header.miner)
    if miner is None:
        raise BadSignature("genesis miner is not a registered participant")
    if not verify(miner.public_key, block_id(block), block.miner_signature):
        raise BadSignature("genesis miner signature does not verify")
    _check_tx_signatures(block, directory)


def validate_block(
    block: Block,
    parent: Block,
    *,
    miners: Sequence[bytes],
    directory: Directory,
    recent_miners: Sequence[bytes] = (),
) -> None:
    """Run the ordered checks; raises the first failure.

    recent_miners are the producers of the blocks inside the diversity window
    below this height; the caller derives them from the chain.
    """
    header = block.header
    if header.prev_hash != block_id(parent) or header.height != parent.header.height + 1:
        raise BadLink(f"block at height {header.height} does not extend its parent")
    if not block.transactions:
        raise BadCount("non-genesis block with no transactions")
    if merkle_root(block.transactions) != header.merkle_root:
        raise BadMerkleRoot(f"merkle root mismatch at height {header.height}")
    if block.tx_count != len(block.transactions):
        raise BadCount(f"tx_count {block.tx_count} != {len(block.transactions)} transactions")
    miner = directory.get(header.miner)
    if miner is None:
        raise BadSignature(f"unknown miner {header.miner.hex()}")
    if not verify(miner.public_key, block_id(block), block.miner_signature):
        raise BadSignature(f"miner signature does not verify at height {header.height}")
    _check_tx_signatures(block, directory)
    if header.miner not in set(miners) or not directory.has_right(header.miner, Right.MINE):
        raise UnpermittedMiner(f"{miner.name} may not mine")
    if header.miner in set(recent_miners):
        raise DiversityViolation(
            f"{miner.name} already mined inside the diversity window at height {header.height}"
        )


def validate_chain(chain: Chain, rules, miners, directory: Directory) -> None:
    """Validate the whole chain; raises ChainValidationError tagged with the
    first failing height.

    rules/miners carry the diversity window and the permitted miner order
    (see consensus.DiversityRule and consensus.MinerSet).
    """
    if not chain.blocks:
        raise ValueError("chain must start at a genesis block")
    permitted = tuple(miners.miners)
    window = rules.window(len(permitted))
    try:
        validate_genesis(chain.blocks[0], directory)
    except BlockValidationError as exc:
        raise ChainValidationError(0, exc) from exc
    recent: list[bytes] = []
    # failures are tagged with the block's position in the walk, which equals
    # its height on honest chains and stays meaningful when the height field
    # itself was tampered with
    for position, (parent, block) in enumerate(zip(chain.blocks, chain.blocks[1:]), start=1):
        try:
            validate_block(
                block,
                parent,
                miners=permitted,
                directory=directory,
                recent_miners=recent,
            )
        except BlockValidationError as exc:
            raise ChainValidationError(position, exc) from exc
        if window > 1:
            recent.append(block.header.miner)
            if len(recent) > window - 1:
                recent.pop(0)


# --- chain store -----------------------------------------------------------------------

def encode_chain(chain: Chain) -> bytes:
    w = Writer()
    for block in chain.blocks:
        w.blob32(encode_block(block))
    return w.getvalue()


def decode_chain(data: bytes) -> Chain:
    r = Reader(data)
    blocks = []
    while r.remaining():
        blocks.append(decode_block(r.blob32()))
    if not blocks:
        raise BadTag("chain file holds no blocks")
    return Chain(tuple(blocks))


def write_chain_file(path: Path, chain: Chain) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_chain(chain))


def load_chain_file(path: Path) -> Chain:
    return decode_chain(path.read_bytes())


def iter_chain_txs(chain: Chain) -> Iterator[tuple[int, Transaction]]:
    for block in chain.blocks:
        for tx in block.transactions:
            yield block.header.height, tx
