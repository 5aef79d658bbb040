"""Exception hierarchy shared across the package."""


class DebatemineError(Exception):
    """Base class for all package errors."""


# corpus ingestion

class MalformedFilename(DebatemineError):
    pass


class DuplicateSpeech(DebatemineError):
    pass


class MissingRoot(DebatemineError):
    pass


class UnreadableFile(DebatemineError):
    pass


class IoFailure(DebatemineError):
    pass


# metadata enrichment

class ConflictingRule(DebatemineError):
    pass


class UnknownCovariate(DebatemineError):
    pass


# text preparation

class EmptyVocabulary(DebatemineError):
    pass


# topic models

class EmptyCorpus(DebatemineError):
    pass


class EmptyDocument(DebatemineError):
    pass


class DimensionMismatch(DebatemineError):
    pass


class UnknownDocument(DebatemineError):
    pass


class MissingDocument(DebatemineError):
    pass


class DegenerateInput(DebatemineError, Warning):
    """Rank-deficient input; issued as a warning because the contract is
    pad-and-continue rather than fail."""


class TooFewDocuments(DebatemineError):
    pass


# evaluation

class UnknownTerm(DebatemineError):
    pass


class MissingReferenceTerm(DebatemineError):
    pass


# run store

class MissingInput(DebatemineError):
    pass


class UnknownRun(DebatemineError):
    pass
