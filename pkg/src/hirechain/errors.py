"""Exception hierarchy shared across the package."""

from __future__ import annotations


class HirechainError(Exception):
    """Base class for all package errors."""


# --- codec ---------------------------------------------------------------

class CodecError(HirechainError):
    """Malformed byte input to a decoder."""


class TruncatedInput(CodecError):
    pass


class BadTag(CodecError):
    pass


class TrailingBytes(CodecError):
    pass


# --- ledger construction -------------------------------------------------

class EmptyTransactionList(HirechainError):
    pass


class NonMonotonicTimestamp(HirechainError):
    pass


# --- block / chain validation --------------------------------------------

class BlockValidationError(HirechainError):
    """A block failed one of the ordered validation checks."""


class BadLink(BlockValidationError):
    pass


class BadMerkleRoot(BlockValidationError):
    pass


class BadCount(BlockValidationError):
    pass


class BadSignature(BlockValidationError):
    pass


class UnpermittedMiner(BlockValidationError):
    pass


class DiversityViolation(BlockValidationError):
    pass


class ChainValidationError(HirechainError):
    """Wraps the first per-block failure found while walking a chain."""

    def __init__(self, height: int, error: BlockValidationError):
        super().__init__(f"block at height {height}: {error!r}")
        self.height = height
        self.error = error


# --- registry -------------------------------------------------------------

class BadKeyLength(HirechainError):
    pass


class NoAuthorityRegistered(HirechainError):
    pass


class SignatureFailure(HirechainError):
    pass


class UnknownParticipant(HirechainError):
    pass


# --- consensus ------------------------------------------------------------

class SelfValidation(HirechainError):
    pass


class NoValidCandidate(HirechainError):
    pass


class ConsensusStalled(HirechainError):
    pass


# --- recruiting / HR -------------------------------------------------------

class MissingVerification(HirechainError):
    pass


class NotCurrentEmployer(HirechainError):
    pass


# --- simulator / CLI --------------------------------------------------------

class ParseError(HirechainError):
    """Input file rejected; the message carries the offending line number."""


class MalformedScenario(HirechainError):
    pass


class UnknownMiner(HirechainError):
    pass


class TxNotCommitted(HirechainError):
    pass


class AlreadyInitialized(HirechainError):
    pass


class BadRoster(HirechainError):
    pass


class NoSuchNode(HirechainError):
    pass


class HeightOutOfRange(HirechainError):
    pass
