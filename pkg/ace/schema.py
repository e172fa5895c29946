"""Base for validated settings blocks."""

from typing import Annotated

from pydantic import BaseModel, BeforeValidator, ConfigDict, ValidationError

from .exceptions import ConfigurationError


def describe(exc):
    parts = []
    for error in exc.errors():
        where = ".".join(str(p) for p in error["loc"]) or "value"
        parts.append(f"{where}: {error['msg']}")
    return "; ".join(parts)


def split_list(value):
    """'a, b,c' -> ('a', 'b', 'c'); sequences pass through."""
    if isinstance(value, str):
        return tuple(p.strip() for p in value.split(",") if p.strip())
    return value


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    @classmethod
    def build(cls, **values):
        try:
            return cls(**values)
        except ValidationError as exc:
            raise ConfigurationError(f"invalid {cls.__name__}: {describe(exc)}") from exc


IntList = Annotated[tuple[int, ...], BeforeValidator(split_list)]
FloatList = Annotated[tuple[float, ...], BeforeValidator(split_list)]
