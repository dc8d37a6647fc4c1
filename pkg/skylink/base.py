import abc

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

__all__ = [
    "Model",
    "Field",
    "model_validator",
    "field_validator",
    "ValidationError",
    "Error",
    "StatisticError",
    "ContractViolation",
    "DataError",
]


class Model(BaseModel):
    model_config = ConfigDict(
        extra="forbid",
        validate_default=True,
        validate_assignment=True,
    )


class Error(Exception, abc.ABC): ...


class StatisticError(Error): ...


class ContractViolation(Error): ...


class DataError(Error): ...
