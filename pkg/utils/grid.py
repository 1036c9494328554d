"""
Indexação espacial dos tokens: mapas 2D <-> 1D, códigos de Morton (ordem Z)
e o tipo Permutation (bijeção validada, com inversa).
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import PermutationError, ShapeError
from .tensor import Tensor, as_tensor

LIMITE_F32_EXATO = 2**24


@dataclass(frozen=True)
class GridShape:
	h: int
	w: int

	def __post_init__(self):
		if self.h < 1 or self.w < 1:
			raise ShapeError(f"grade precisa de h, w >= 1, recebido {self.h}x{self.w}")

	def n(self) -> int:
		return self.h * self.w

	def to_index(self, y, x):
		return np.asarray(y) * self.w + np.asarray(x)

	def to_coords(self, idx) -> tuple[np.ndarray, np.ndarray]:
		return np.divmod(np.asarray(idx), self.w)

	@classmethod
	def parse(cls, texto: str) -> "GridShape":
		h, _, w = texto.lower().partition("x")
		return cls(int(h), int(w or h))

	def __str__(self) -> str:
		return f"{self.h}x{self.w}"


class Permutation:
	"""
	forward[rank] = índice do token; inverse[token] = rank.
	"""

	def __init__(self, forward):
		forward = np.asarray(forward)
		if forward.ndim != 1:
			raise PermutationError(f"permutação deve ser 1D, recebido {forward.shape}")

		if forward.size and not np.issubdtype(forward.dtype, np.integer):
			if not np.all(forward == np.round(forward)):
				raise PermutationError("permutação com índices não inteiros")

		forward = forward.astype(np.int64)
		n = forward.size
		visto = np.zeros(n, dtype=bool)

		if n and (forward.min() < 0 or forward.max() >= n):
			raise PermutationError(f"índices fora de [0, {n})")

		visto[forward] = True
		if not visto.all():
			raise PermutationError("array não é uma bijeção")

		forward.setflags(write=False)
		self.forward = forward

	@cached_property
	def inverse(self) -> np.ndarray:
		inv = np.empty_like(self.forward)
		inv[self.forward] = np.arange(self.forward.size, dtype=np.int64)
		inv.setflags(write=False)
		return inv

	@property
	def n(self) -> int:
		return int(self.forward.size)

	@classmethod
	def identity(cls, n: int) -> "Permutation":
		return cls(np.arange(n, dtype=np.int64))

	def compose(self, outra: "Permutation") -> "Permutation":
		"""Aplica `outra` primeiro e depois self: resultado[i] = outra.forward[self.forward[i]]."""
		if outra.n != self.n:
			raise PermutationError(f"tamanhos diferentes: {self.n} e {outra.n}")
		return Permutation(outra.forward[self.forward])

	def to_tensor(self) -> Tensor:
		if self.n > LIMITE_F32_EXATO:
			raise PermutationError(f"N={self.n} excede 2^24, índices não são exatos em f32")
		return self.forward.astype(np.float32)

	@classmethod
	def from_tensor(cls, t) -> "Permutation":
		t = as_tensor(t, nome="permutação")
		if t.ndim != 1:
			raise PermutationError(f"permutação serializada deve ter rank 1, recebido {t.shape}")
		return cls(t)

	def __len__(self) -> int:
		return self.n

	def __eq__(self, outra) -> bool:
		if not isinstance(outra, Permutation):
			return NotImplemented
		return np.array_equal(self.forward, outra.forward)

	def __hash__(self) -> int:
		return hash(self.forward.tobytes())

	def __repr__(self) -> str:
		previa = ", ".join(str(i) for i in self.forward[:8])
		return f"Permutation(n={self.n}, forward=[{previa}{', ...' if self.n > 8 else ''}])"


def _espalhar_bits(v: np.ndarray) -> np.ndarray:
	v = v.astype(np.uint64) & np.uint64(0xFFFFFFFF)
	v = (v | (v << np.uint64(16))) & np.uint64(0x0000FFFF0000FFFF)
	v = (v | (v << np.uint64(8))) & np.uint64(0x00FF00FF00FF00FF)
	v = (v | (v << np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
	v = (v | (v << np.uint64(2))) & np.uint64(0x3333333333333333)
	v = (v | (v << np.uint64(1))) & np.uint64(0x5555555555555555)
	return v


def morton_encode(x, y):
	"""
	Código de Morton: bit b de x vai para o bit 2b, bit b de y para o bit 2b+1.
	Aceita escalares ou arrays (x = coluna, y = linha).
	"""
	escalar = np.isscalar(x) and np.isscalar(y)
	x = np.asarray(x)
	y = np.asarray(y)

	if np.any(x < 0) or np.any(y < 0) or np.any(x >= 2**31) or np.any(y >= 2**31):
		raise ShapeError("coordenadas de Morton devem estar em [0, 2^31)")

	code = _espalhar_bits(x) | (_espalhar_bits(y) << np.uint64(1))
	return int(code) if escalar else code


def morton_codes(shape: GridShape) -> np.ndarray:
	"""Código de Morton de cada token, em ordem row-major."""
	y, x = np.divmod(np.arange(shape.n(), dtype=np.int64), shape.w)
	return morton_encode(x, y)


def morton_order(shape: GridShape) -> Permutation:
	return Permutation(np.argsort(morton_codes(shape), kind="stable"))


def apply_permutation(p: Permutation, t) -> Tensor:
	t = np.asarray(t, dtype=np.float32)
	if t.ndim < 1 or t.shape[0] != p.n:
		raise ShapeError(f"primeira extensão {t.shape[:1]} não bate com N={p.n}")
	return np.ascontiguousarray(t[p.forward])


def invert(p: Permutation) -> Permutation:
	return Permutation(p.inverse)
