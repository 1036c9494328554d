from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, DivisibilityError
from .grid import GridShape, Permutation


class StripeVariant(str, Enum):
	FULL = "full"
	NO_INTERLEAVE = "no_interleave"
	NO_SORT = "no_sort"


@dataclass(frozen=True)
class StripeConfig:
	g: int = 4
	variant: StripeVariant = StripeVariant.FULL

	def __post_init__(self):
		object.__setattr__(self, "variant", StripeVariant(self.variant))
		if self.g < 1:
			raise ConfigError(f"g deve ser >= 1, recebido {self.g}")

	def check(self, n: int):
		if n % self.g:
			raise DivisibilityError(n, self.g, "g")


def _interleave(forward: np.ndarray, g: int) -> np.ndarray:
	# T[t, g] = pi[t*G + g]; sigma = flatten(T^T)
	return forward.reshape(-1, g).T.reshape(-1)


def stripe_sort(pi: Permutation, cfg: StripeConfig = StripeConfig(), morton: Permutation | None = None) -> Permutation:
	"""
	Ordem final de varredura σ: visita cada G-ésimo elemento de π antes de
	voltar ao próximo deslocamento.

	- full: entrelaça π.
	- no_interleave: devolve π (ranking sem entrelaçamento).
	- no_sort: entrelaça a ordem de Morton (entrelaçamento sem ranking).
	"""
	cfg.check(pi.n)

	match cfg.variant:
		case StripeVariant.FULL:
			return Permutation(_interleave(pi.forward, cfg.g))

		case StripeVariant.NO_INTERLEAVE:
			return pi

		case StripeVariant.NO_SORT:
			if morton is None:
				raise ConfigError("a variante no_sort precisa da ordem de Morton da grade")
			if morton.n != pi.n:
				raise ConfigError(f"ordem de Morton com N={morton.n}, π com N={pi.n}")
			return Permutation(_interleave(morton.forward, cfg.g))


def block_members(sigma: Permutation, g: int) -> list[frozenset[int]]:
	n = sigma.n
	if g < 1 or n % g:
		raise DivisibilityError(n, g, "g")

	tamanho = n // g
	return [
		frozenset(int(i) for i in sigma.forward[b * tamanho:(b + 1) * tamanho])
		for b in range(g)
	]


def block_map(sigma: Permutation, g: int, shape: GridShape) -> np.ndarray:
	"""Mapa H×W com o id do bloco de σ em que cada token cai."""
	if sigma.n != shape.n():
		raise ConfigError(f"σ com N={sigma.n}, grade {shape} com N={shape.n()}")

	if g < 1 or sigma.n % g:
		raise DivisibilityError(sigma.n, g, "g")

	blocos = np.empty(sigma.n, dtype=np.int64)
	blocos[sigma.forward] = np.arange(sigma.n) // (sigma.n // g)
	return blocos.reshape(shape.h, shape.w)
