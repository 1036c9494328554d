import logging

from dataclasses import dataclass
from enum import Enum

import numpy as np

from scipy import ndimage

from .errors import ConfigError, DivisibilityError, ShapeError
from .grid import GridShape, Permutation, morton_codes, morton_order
from .tensor import Tensor, as_tensor

logger = logging.getLogger(__name__)

SOBEL_X = np.array(
	[[-1.0, 0.0, 1.0],
	 [-2.0, 0.0, 2.0],
	 [-1.0, 0.0, 1.0]]
)
SOBEL_Y = SOBEL_X.T.copy()


class Granularity(str, Enum):
	TOKEN = "token"
	ZGROUP = "zgroup"


@dataclass(frozen=True)
class SaliencyMap:
	shape: GridShape
	m: Tensor

	def __post_init__(self):
		if self.m.shape != (self.shape.h, self.shape.w):
			raise ShapeError(f"mapa {self.m.shape} não bate com a grade {self.shape}")
		if np.any(self.m < 0):
			raise ConfigError("saliência deve ser não negativa")

	@classmethod
	def from_tensor(cls, t) -> "SaliencyMap":
		t = as_tensor(t, nome="saliência")
		if t.ndim != 2:
			raise ShapeError(f"saliência deve ser H×W, recebido {t.shape}")
		return cls(GridShape(*t.shape), t)

	def flat(self) -> np.ndarray:
		return self.m.reshape(-1)

	def scaled(self, c: float) -> "SaliencyMap":
		return SaliencyMap(self.shape, (self.m * np.float32(c)).astype(np.float32))


@dataclass(frozen=True)
class OrderingConfig:
	granularity: Granularity = Granularity.ZGROUP
	group_size: int = 4

	def __post_init__(self):
		object.__setattr__(self, "granularity", Granularity(self.granularity))
		if self.group_size < 1:
			raise ConfigError(f"group_size deve ser positivo, recebido {self.group_size}")


def sobel_magnitude(x) -> SaliencyMap:
	"""
	M = sqrt((Sx * X)^2 + (Sy * X)^2), com convolução por canal somada sobre os
	D canais antes de elevar ao quadrado. Bordas com padding zero.
	"""
	x = as_tensor(x, nome="mapa de features")
	if x.ndim == 2:
		x = x[:, :, None]

	if x.ndim != 3:
		raise ShapeError(f"sobel espera H×W×D, recebido {x.shape}")

	h, w, d = x.shape
	gx = np.zeros((h, w), dtype=np.float64)
	gy = np.zeros((h, w), dtype=np.float64)

	for c in range(d):
		canal = x[:, :, c].astype(np.float64)
		gx += ndimage.convolve(canal, SOBEL_X, mode="constant", cval=0.0)
		gy += ndimage.convolve(canal, SOBEL_Y, mode="constant", cval=0.0)

	m = np.sqrt(gx * gx + gy * gy).astype(np.float32)
	return SaliencyMap(GridShape(h, w), m)


def group_energy(m: SaliencyMap, morton: Permutation, group_size: int) -> Tensor:
	n = m.shape.n()
	if morton.n != n:
		raise ShapeError(f"permutação com N={morton.n}, mapa com N={n}")

	if group_size < 1 or n % group_size:
		raise DivisibilityError(n, group_size, "group_size")

	valores = m.flat().astype(np.float64)[morton.forward]
	return valores.reshape(-1, group_size).sum(axis=1).astype(np.float32)


def importance_order(m: SaliencyMap, cfg: OrderingConfig = OrderingConfig()) -> Permutation:
	"""
	Ordem decrescente de importância (π). Empates resolvidos pela ordem de Morton,
	de modo que saliência uniforme reproduz exatamente a ordem Z.
	"""
	if cfg.granularity is Granularity.TOKEN:
		codes = morton_codes(m.shape)
		# lexsort: a última chave é a primária
		return Permutation(np.lexsort((codes, -m.flat())))

	morton = morton_order(m.shape)
	energia = group_energy(m, morton, cfg.group_size)
	ordem_grupos = np.argsort(-energia, kind="stable")
	forward = morton.forward.reshape(-1, cfg.group_size)[ordem_grupos].reshape(-1)

	logger.debug(
		"ordem por z-grupos: %d grupos de %d, energia máxima %.4g",
		energia.size, cfg.group_size, float(energia.max()),
	)
	return Permutation(forward)
