"""Exception hierarchy shared by all modules."""


class DebtRankError(Exception):
    """Base class for every error raised by this package."""

    code = "error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class ValidationError(DebtRankError, ValueError):
    code = "validation_error"


class DimensionMismatch(ValidationError):
    code = "dimension_mismatch"


class NonPositiveEquity(ValidationError):
    code = "non_positive_equity"

    def __init__(self, bank_id, equity=None):
        self.bank_id = bank_id
        msg = f"bank {bank_id!r} has non-positive initial equity"
        if equity is not None:
            msg += f" ({equity!r})"
        super().__init__(msg)


class NegativeExposure(ValidationError):
    code = "negative_exposure"

    def __init__(self, i, j, value=None):
        self.i, self.j = i, j
        super().__init__(f"negative exposure at ({i}, {j}): {value!r}")


class SelfLoop(ValidationError):
    code = "self_loop"

    def __init__(self, i):
        self.i = i
        super().__init__(f"nonzero self exposure for bank {i}")


class NegativeAlpha(ValidationError):
    code = "negative_alpha"


class UnknownBank(ValidationError):
    code = "unknown_bank"

    def __init__(self, bank):
        self.bank = bank
        super().__init__(f"unknown bank {bank!r}")


class NegativeZ(ValidationError):
    code = "negative_z"


class ZeroTotal(ValidationError):
    code = "zero_total"


class Unachievable(ValidationError):
    code = "unachievable_density"


class UnsupportedMargin(ValidationError):
    code = "unsupported_margin"

    def __init__(self, bank, direction):
        self.bank = bank
        self.direction = direction
        super().__init__(f"bank {bank} has a positive {direction} margin but no {direction} links")


class SingularSystem(DebtRankError, ArithmeticError):
    code = "singular_system"


class RASNotConverged(DebtRankError):
    code = "ras_not_converged"

    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"RAS did not converge after {iterations} iterations (residual {residual:.3e})")

    def to_dict(self):
        d = super().to_dict()
        d.update(residual=self.residual, iterations=self.iterations)
        return d


class ExhaustedRedraws(DebtRankError):
    code = "exhausted_redraws"

    def __init__(self, sample, attempts, last_error):
        self.sample = sample
        self.attempts = attempts
        self.last_error = last_error
        super().__init__(
            f"sample {sample}: no feasible topology after {attempts} draws (last: {last_error})"
        )


class ParseError(DebtRankError):
    code = "parse_error"

    def __init__(self, line, column, reason, path=None):
        self.line = line
        self.column = column
        self.reason = reason
        self.path = path
        where = f"{path}:" if path else ""
        super().__init__(f"{where}{line}: column {column!r}: {reason}")

    def to_dict(self):
        d = super().to_dict()
        d.update(line=self.line, column=self.column, reason=self.reason)
        if self.path:
            d["path"] = str(self.path)
        return d
