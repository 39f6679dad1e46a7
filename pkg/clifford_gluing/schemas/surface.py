"""
Pydantic schemas for initial-surface data and region tags.

An initial surface is either M(k, m, n1, n2, sigma), desingularizing k Clifford tori
through C1 and C2, or N(k, m, n, n'_1, n'_-1, sigma'_1, sigma'_-1), which adds the
Clifford torus T' and 2k further intersection circles on it.
"""

from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from clifford_gluing.core.errors import InvalidArgumentError


class InitialSurfaceSpec(BaseModel):
    """
    Data of an initial surface.

    For M the fields n1, n2, sigma are used; for N the fields n, n1p, nm1p, sigma1p, sigmam1p.
    """

    model_config = ConfigDict(frozen=True)

    variant: Literal["M", "N"]
    k: int = Field(..., ge=2)
    m: int = Field(..., ge=1)
    n1: int = Field(1, ge=1)
    n2: int = Field(1, ge=1)
    sigma: int = Field(0, ge=0, le=1)
    n: int = Field(1, ge=1)
    n1p: int = Field(1, ge=1)  # n'_1: Scherk towers placed by R_C1^(j pi/k) with j even
    nm1p: int = Field(1, ge=1)  # n'_-1: the same with j odd
    sigma1p: int = Field(0, ge=0, le=1)
    sigmam1p: int = Field(0, ge=0, le=1)

    @model_validator(mode="after")
    def validate_coprime(self) -> InitialSurfaceSpec:
        """
        Ensures:
        - n1, n2 relatively prime for M
        - n, n'_1, n'_-1 relatively prime for N
        """
        if self.variant == "M" and math.gcd(self.n1, self.n2) != 1:
            raise ValueError(f"n1={self.n1} and n2={self.n2} must be relatively prime")
        if self.variant == "N" and math.gcd(math.gcd(self.n, self.n1p), self.nm1p) != 1:
            raise ValueError(f"n={self.n}, n'_1={self.n1p}, n'_-1={self.nm1p} must be relatively prime")
        return self

    @classmethod
    def M(cls, k: int, m: int, n1: int, n2: int, sigma: int = 0) -> InitialSurfaceSpec:
        return cls(variant="M", k=k, m=m, n1=n1, n2=n2, sigma=sigma)

    @classmethod
    def N(
        cls, k: int, m: int, n: int, n1p: int, nm1p: int, sigma1p: int = 0, sigmam1p: int = 0
    ) -> InitialSurfaceSpec:
        return cls(variant="N", k=k, m=m, n=n, n1p=n1p, nm1p=nm1p, sigma1p=sigma1p, sigmam1p=sigmam1p)

    @classmethod
    def parse(cls, text: str) -> InitialSurfaceSpec:
        """Parse "M(2,4,1,1,0)" or "N(2,1,1,1,1,0,0)"."""
        text = text.strip().replace(" ", "")
        if len(text) < 4 or text[0] not in "MN" or text[1] != "(" or text[-1] != ")":
            raise InvalidArgumentError(f"cannot parse surface data {text!r}")
        try:
            values = [int(v) for v in text[2:-1].split(",")]
        except ValueError as exc:
            raise InvalidArgumentError(f"cannot parse surface data {text!r}") from exc
        if text[0] == "M":
            if len(values) != 5:
                raise InvalidArgumentError("M needs five integers (k, m, n1, n2, sigma)")
            return cls.M(*values)
        if len(values) != 7:
            raise InvalidArgumentError("N needs seven integers (k, m, n, n'_1, n'_-1, sigma'_1, sigma'_-1)")
        return cls.N(*values)

    @property
    def label(self) -> str:
        if self.variant == "M":
            return f"M({self.k},{self.m},{self.n1},{self.n2},{self.sigma})"
        return f"N({self.k},{self.m},{self.n},{self.n1p},{self.nm1p},{self.sigma1p},{self.sigmam1p})"

    def expected_genus(self) -> int:
        k, m = self.k, self.m
        if self.variant == "M":
            return k * (k - 1) * m * (self.n1 + self.n2) + 1
        return 2 * k * k * m * (self.n1p + self.nm1p) + 4 * k * m * self.n * (k - 1) + 1


class RegionTag(BaseModel):
    """An extended standard region: a tower region S[C] or a toral region S[T]."""

    kind: Literal["tower", "torus"]
    id: str
    m_c: int | None = None  # periods of the tower, tower regions only
    k_c: int | None = None  # tori through the circle, tower regions only
