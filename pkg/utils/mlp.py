"""
Bloco MLP denso, roteamento por consistência residual, estatísticas das
atualizações do MLP e a sonda de substituição por centróides (k-means).
"""
import logging
import math

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .data import StatsRow
from .errors import ConfigError, ShapeError, UndefinedCorrelationError
from .grid import Permutation
from .tensor import Rng, Tensor, as_tensor, check_finite, gelu, layernorm, matmul

logger = logging.getLogger(__name__)

KMEANS_ITERS = 25
EPS_NORMA = 1e-12


class BypassMode(str, Enum):
	IDENTITY = "identity"
	LAYERNORM = "layernorm"


@dataclass(frozen=True)
class MlpWeights:
	w1: Tensor
	b1: Tensor
	w2: Tensor
	b2: Tensor
	ln_gamma: Tensor
	ln_beta: Tensor

	def __post_init__(self):
		for nome in ("w1", "b1", "w2", "b2", "ln_gamma", "ln_beta"):
			object.__setattr__(self, nome, as_tensor(getattr(self, nome), nome=nome))

		if self.w1.ndim != 2 or self.w2.ndim != 2:
			raise ShapeError("w1 e w2 devem ser matrizes")

		d, h = self.w1.shape
		if self.w2.shape != (h, d):
			raise ShapeError(f"w2 deve ser {h}x{d}, recebido {self.w2.shape}")

		if self.b1.shape != (h,) or self.b2.shape != (d,):
			raise ShapeError(f"b1/b2 devem ser ({h},)/({d},), recebido {self.b1.shape}/{self.b2.shape}")

		if self.ln_gamma.shape != (d,) or self.ln_beta.shape != (d,):
			raise ShapeError(f"parâmetros do layernorm devem ser ({d},)")

	@property
	def d(self) -> int:
		return self.w1.shape[0]

	@property
	def hidden(self) -> int:
		return self.w1.shape[1]

	@classmethod
	def zeros(cls, d: int, hidden: int) -> "MlpWeights":
		z = np.zeros
		return cls(
			z((d, hidden), np.float32), z(hidden, np.float32),
			z((hidden, d), np.float32), z(d, np.float32),
			np.ones(d, np.float32), z(d, np.float32),
		)

	@classmethod
	def random(cls, rng: Rng, d: int, hidden: int) -> "MlpWeights":
		return cls(
			rng.normal((d, hidden), 1.0 / math.sqrt(d)),
			rng.normal((hidden,), 0.02),
			rng.normal((hidden, d), 1.0 / math.sqrt(hidden)),
			rng.normal((d,), 0.02),
			(1.0 + rng.normal((d,), 0.1)).astype(np.float32),
			rng.normal((d,), 0.02),
		)


@dataclass(frozen=True)
class RouterConfig:
	keep_fraction: float = 1.0
	bypass_mode: BypassMode = BypassMode.IDENTITY

	def __post_init__(self):
		object.__setattr__(self, "bypass_mode", BypassMode(self.bypass_mode))
		if not 0.0 < self.keep_fraction <= 1.0:
			raise ConfigError(f"keep_fraction deve estar em (0, 1], recebido {self.keep_fraction}")

	def keep_count(self, n: int) -> int:
		# arredondamento meio-para-cima, limitado a [1, N]
		k = math.floor(Fraction(repr(float(self.keep_fraction))) * n + Fraction(1, 2))
		return max(1, min(n, k))


def _checar_tokens(x, w: MlpWeights) -> Tensor:
	x = as_tensor(x, nome="x")
	if x.ndim != 2 or x.shape[1] != w.d:
		raise ShapeError(f"x deve ser N×{w.d}, recebido {x.shape}")
	return x


def _delta(x: Tensor, w: MlpWeights) -> Tensor:
	oculto = gelu(matmul(layernorm(x, w.ln_gamma, w.ln_beta), w.w1) + w.b1)
	return check_finite(matmul(oculto, w.w2) + w.b2, nome="delta")


def mlp_forward(x, w: MlpWeights) -> tuple[Tensor, Tensor]:
	"""Δ = W2·gelu(W1·LN(x) + b1) + b2 por linha; y = x + Δ."""
	x = _checar_tokens(x, w)
	delta = _delta(x, w)
	return x + delta, delta


def route_mlp(x, w: MlpWeights, sigma: Permutation, cfg: RouterConfig) -> Tensor:
	"""
	O MLP só roda no keep-set (prefixo de σ com K tokens); os demais seguem
	pelo caminho residual (identidade ou LN, conforme bypass_mode).
	"""
	x = _checar_tokens(x, w)
	n = x.shape[0]
	if sigma.n != n:
		raise ShapeError(f"σ com N={sigma.n}, x com N={n}")

	k = cfg.keep_count(n)
	keep = sigma.forward[:k]
	resto = sigma.forward[k:]

	y_keep, _ = mlp_forward(x[keep], w)
	out = x.copy()
	out[keep] = y_keep

	if cfg.bypass_mode is BypassMode.LAYERNORM and resto.size:
		out[resto] = layernorm(x[resto], w.ln_gamma, w.ln_beta)

	return out


def update_magnitudes(delta) -> Tensor:
	delta = as_tensor(delta, nome="delta").astype(np.float64)
	return np.sqrt(np.sum(delta * delta, axis=1)).astype(np.float32)


def token_dissimilarity(x) -> Tensor:
	"""
	d_i = (1 / (N-1)) · Σ_{j≠i} (1 - cos(x_i, x_j)), calculado em O(N·d)
	a partir da soma dos vetores normalizados.
	"""
	x = as_tensor(x, nome="x").astype(np.float64)
	if x.ndim != 2:
		raise ShapeError(f"x deve ser N×d, recebido {x.shape}")

	n = x.shape[0]
	if n < 2:
		return np.zeros(n, dtype=np.float32)

	normas = np.maximum(np.linalg.norm(x, axis=1), EPS_NORMA)
	unit = x / normas[:, None]
	proprio = np.sum(unit * unit, axis=1)
	soma_cos = unit @ unit.sum(axis=0) - proprio

	d = ((n - 1) - soma_cos) / (n - 1)
	return np.clip(d, 0.0, 2.0).astype(np.float32)


def pearson(a, b) -> float:
	a = np.asarray(a, dtype=np.float64).reshape(-1)
	b = np.asarray(b, dtype=np.float64).reshape(-1)

	if a.size != b.size:
		raise ShapeError(f"tamanhos diferentes: {a.size} e {b.size}")

	if a.size < 2:
		raise UndefinedCorrelationError("pearson precisa de N >= 2")

	da = a - a.mean()
	db = b - b.mean()
	denominador = math.sqrt(float(np.dot(da, da)) * float(np.dot(db, db)))
	if denominador == 0.0:
		raise UndefinedCorrelationError("correlação indefinida para entrada constante")

	return float(np.clip(np.dot(da, db) / denominador, -1.0, 1.0))


def dissimilarity_drift(denso, roteado) -> float:
	"""Diferença média absoluta entre as dissimilaridades de duas saídas."""
	return float(np.mean(np.abs(
		token_dissimilarity(denso).astype(np.float64) - token_dissimilarity(roteado).astype(np.float64)
	)))


def relative_perturbation(original, substituido) -> float:
	original = np.asarray(original, dtype=np.float64)
	substituido = np.asarray(substituido, dtype=np.float64)
	norma = float(np.linalg.norm(original))
	return float(np.linalg.norm(substituido - original)) / max(norma, EPS_NORMA)


def mlp_block_stats(layer: int, x, w: MlpWeights, sigma: Permutation, cfg: RouterConfig) -> StatsRow:
	"""Linha do mlp-stats: correlação dissimilaridade × ‖Δ‖ e médias por conjunto."""
	x = _checar_tokens(x, w)
	y, delta = mlp_forward(x, w)
	u = update_magnitudes(delta).astype(np.float64)

	k = cfg.keep_count(x.shape[0])
	keep = sigma.forward[:k]
	resto = sigma.forward[k:]

	try:
		rho = pearson(token_dissimilarity(x), u)
	except UndefinedCorrelationError as e:
		logger.warning("camada %d: %s", layer, e)
		rho = float("nan")

	return {
		"layer": layer,
		"K": k,
		"rho": rho,
		"mean_u_keep": float(u[keep].mean()),
		"mean_u_bypass": float(u[resto].mean()) if resto.size else 0.0,
		"drift": dissimilarity_drift(y, route_mlp(x, w, sigma, cfg)),
	}


@dataclass(frozen=True)
class KMeansResult:
	centroids: np.ndarray
	labels: np.ndarray
	history: tuple[float, ...]

	@property
	def distortion(self) -> float:
		return self.history[-1]


def _dist2(x: np.ndarray, c: np.ndarray, elementos: int = 2**22) -> np.ndarray:
	out = np.empty((x.shape[0], c.shape[0]), dtype=np.float64)
	bloco = max(1, elementos // (c.shape[0] * x.shape[1]))
	for inicio in range(0, x.shape[0], bloco):
		diff = x[inicio:inicio + bloco, None, :] - c[None, :, :]
		out[inicio:inicio + bloco] = np.einsum("nkd,nkd->nk", diff, diff)
	return out


def _kmeans_pp(x: np.ndarray, k: int, rng: Rng) -> np.ndarray:
	n = x.shape[0]
	escolhidos = [int(rng.integers(0, n))]
	d2 = _dist2(x, x[escolhidos]).min(axis=1)

	for _ in range(1, k):
		total = float(d2.sum())
		if total > 0.0:
			proximo = rng.choice(n, p=d2 / total)
		else:
			# pontos restantes coincidem com centróides já escolhidos
			ja = set(escolhidos)
			proximo = next(i for i in range(n) if i not in ja)
		escolhidos.append(proximo)
		d2 = np.minimum(d2, _dist2(x, x[[proximo]])[:, 0])

	return x[escolhidos].copy()


def kmeans_fit(x, k: int, seed: int = 0, iters: int = KMEANS_ITERS) -> KMeansResult:
	"""
	Lloyd com sementes k-means++ (RNG determinístico). Cluster vazio é
	re-semeado no ponto mais distante do próprio centróide.
	"""
	x64 = as_tensor(x, nome="x").astype(np.float64)
	if x64.ndim != 2:
		raise ShapeError(f"x deve ser N×d, recebido {x64.shape}")

	n = x64.shape[0]
	if not 1 <= k <= n:
		raise ConfigError(f"k deve estar em [1, {n}], recebido {k}")

	centroids = _kmeans_pp(x64, k, Rng(seed))
	history: list[float] = []

	for _ in range(max(0, iters)):
		dist = _dist2(x64, centroids)
		labels = np.argmin(dist, axis=1)
		minimas = dist[np.arange(n), labels]
		history.append(float(minimas.mean()))

		novos = centroids.copy()
		for c in range(k):
			membros = labels == c
			if np.any(membros):
				novos[c] = x64[membros].mean(axis=0)
			else:
				mais_longe = int(np.argmax(minimas))
				novos[c] = x64[mais_longe]
				minimas[mais_longe] = 0.0
				logger.debug("k-means: cluster %d vazio, re-semeado no ponto %d", c, mais_longe)
		centroids = novos

	dist = _dist2(x64, centroids)
	labels = np.argmin(dist, axis=1)
	history.append(float(dist[np.arange(n), labels].mean()))

	return KMeansResult(centroids, labels, tuple(history))


def kmeans_replace(x, k: int, seed: int = 0, iters: int = KMEANS_ITERS) -> tuple[Tensor, float]:
	resultado = kmeans_fit(x, k, seed, iters)
	substituido = resultado.centroids[resultado.labels].astype(np.float32)
	return substituido, resultado.distortion
