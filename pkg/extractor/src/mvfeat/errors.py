class JobError(RuntimeError):
    """An extraction job cannot proceed; message names the object/path."""


class JobValidationError(ValueError):
    """Job description violates an invariant (counts, prompts, tags)."""
