"""
Atenção densa de referência com viés posicional 2D decomposto e o kernel
A-shape em blocos (online softmax) que opera na ordem permutada dos tokens.
"""
import logging
import math
import statistics
import time

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .data import BenchRow
from .errors import ConfigError, ShapeError
from .grid import GridShape, Permutation, morton_order
from .tensor import Rng, Tensor, _produto, as_tensor, check_finite, matmul

logger = logging.getLogger(__name__)

TILE_LOCAL = 32
TILE_GLOBAL = 128


@dataclass(frozen=True)
class BiasTables:
	"""
	B[q, k] = bh[q, k // w] + bw[q, k % w], com q e k índices espaciais.
	"""
	bh: Tensor
	bw: Tensor
	w: int

	def __post_init__(self):
		bh = as_tensor(self.bh, nome="bh")
		bw = as_tensor(self.bw, nome="bw")
		object.__setattr__(self, "bh", bh)
		object.__setattr__(self, "bw", bw)

		if bh.ndim != 2 or bh.shape != bw.shape:
			raise ShapeError(f"bh e bw devem ser S_q×w iguais, recebido {bh.shape} e {bw.shape}")

		if bh.shape[1] != self.w:
			raise ShapeError(f"tabelas com {bh.shape[1]} colunas, w={self.w}")

	@property
	def s_q(self) -> int:
		return self.bh.shape[0]

	@property
	def s_k(self) -> int:
		return self.w * self.w

	@classmethod
	def zeros(cls, s_q: int, s_k: int) -> "BiasTables":
		w = _lado(s_k)
		return cls(np.zeros((s_q, w), np.float32), np.zeros((s_q, w), np.float32), w)

	def dense(self, sq_perm: Permutation | None = None, sk_perm: Permutation | None = None) -> Tensor:
		"""Materializa B̂[i, j] = B[σ_Q(i), σ_K(j)]."""
		linhas = sq_perm.forward if sq_perm is not None else np.arange(self.s_q)
		chaves = sk_perm.forward if sk_perm is not None else np.arange(self.s_k)
		return (self.bh[linhas][:, chaves // self.w] + self.bw[linhas][:, chaves % self.w]).astype(np.float32)


@dataclass(frozen=True)
class AShapeConfig:
	b_row: int = TILE_GLOBAL
	b_col: int = TILE_GLOBAL
	r: float = 1.0
	tau: float | None = None

	def __post_init__(self):
		if self.b_row < 1 or self.b_col < 1:
			raise ConfigError(f"tiles devem ser >= 1, recebido {self.b_row}x{self.b_col}")

		if not 0.0 <= self.r <= 1.0:
			raise ConfigError(f"densidade r deve estar em [0, 1], recebido {self.r}")

		if self.tau is not None and not self.tau > 0:
			raise ConfigError(f"tau do kernel deve ser positivo, recebido {self.tau}")

	def scale(self, d: int) -> float:
		return self.tau if self.tau is not None else 1.0 / math.sqrt(d)


@dataclass(frozen=True)
class ActiveSet:
	t_row: int
	t_col: int
	sets: tuple[tuple[int, ...], ...]

	def tile_pairs(self) -> int:
		return sum(len(j) for j in self.sets)

	def density(self) -> float:
		return self.tile_pairs() / (self.t_row * self.t_col)


def _lado(s_k: int) -> int:
	w = math.isqrt(s_k)
	if w * w != s_k:
		raise ShapeError(f"S_k={s_k} não é um quadrado perfeito")
	return w


def _prefixo(t_col: int, r: float) -> int:
	# valor decimal de r: 0.3 conta como 3/10, não como o binário logo abaixo
	return math.floor(Fraction(repr(float(r))) * t_col)


def build_active_set(t_row: int, t_col: int, r: float) -> ActiveSet:
	"""J_i = {0, ..., floor(r·T_col) - 1} ∪ {i}."""
	if t_row < 1 or t_col < 1:
		raise ConfigError(f"contagem de tiles deve ser >= 1, recebido {t_row}x{t_col}")

	prefixo = _prefixo(t_col, r)
	sets = []
	for i in range(t_row):
		diagonal = min(i, t_col - 1)
		sets.append(tuple(sorted(set(range(prefixo)) | {diagonal})))

	return ActiveSet(t_row, t_col, tuple(sets))


def achieved_density(t_row: int, t_col: int, r: float) -> float:
	return build_active_set(t_row, t_col, r).density()


def tile_counts(s_q: int, s_k: int, cfg: AShapeConfig) -> tuple[int, int]:
	return math.ceil(s_q / cfg.b_row), math.ceil(s_k / cfg.b_col)


def active_mask(active: ActiveSet, s_q: int, s_k: int, b_row: int, b_col: int) -> np.ndarray:
	"""Máscara S_q×S_k das colunas cobertas pelos tiles ativos de cada linha."""
	mascara = np.zeros((s_q, s_k), dtype=bool)
	for i, js in enumerate(active.sets):
		linhas = slice(i * b_row, min((i + 1) * b_row, s_q))
		for j in js:
			mascara[linhas, j * b_col:min((j + 1) * b_col, s_k)] = True
	return mascara


def _validar(q, k, v, bias: BiasTables, sq_perm: Permutation, sk_perm: Permutation):
	q = as_tensor(q, nome="q")
	k = as_tensor(k, nome="k")
	v = as_tensor(v, nome="v")

	if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
		raise ShapeError("q, k e v devem ser matrizes")

	s_q, d = q.shape
	s_k = k.shape[0]

	if k.shape[1] != d:
		raise ShapeError(f"q tem d={d}, k tem d={k.shape[1]}")

	if v.shape[0] != s_k:
		raise ShapeError(f"k tem {s_k} linhas, v tem {v.shape[0]}")

	if bias.s_q != s_q:
		raise ShapeError(f"tabelas de viés com S_q={bias.s_q}, q com {s_q}")

	if bias.s_k != s_k:
		raise ShapeError(f"w²={bias.s_k} diferente de S_k={s_k}")

	if sq_perm.n != s_q or sk_perm.n != s_k:
		raise ShapeError(f"permutações com {sq_perm.n}/{sk_perm.n}, esperado {s_q}/{s_k}")

	return q, k, v


def _softmax_linhas(scores: np.ndarray) -> np.ndarray:
	maximo = scores.max(axis=1, keepdims=True)
	e = np.exp(scores - maximo)
	return (e / e.sum(axis=1, keepdims=True)).astype(np.float32)


def _scores_densos(q, k, bias, sq_perm, sk_perm, tau: float) -> np.ndarray:
	return np.float32(tau) * matmul(q, k.T) + bias.dense(sq_perm, sk_perm)


def dense_attention_ref(q, k, v, bias: BiasTables, sq_perm: Permutation, sk_perm: Permutation, tau: float) -> Tensor:
	"""O = softmax(τ·QKᵀ + B̂)·V com a matriz de scores explícita."""
	q, k, v = _validar(q, k, v, bias, sq_perm, sk_perm)
	p = _softmax_linhas(_scores_densos(q, k, bias, sq_perm, sk_perm, tau))
	return check_finite(matmul(p, v), nome="atenção densa")


def masked_dense_attention(q, k, v, bias: BiasTables, sq_perm: Permutation, sk_perm: Permutation, cfg: AShapeConfig) -> Tensor:
	"""Softmax denso restrito às colunas dos tiles ativos de cada linha."""
	q, k, v = _validar(q, k, v, bias, sq_perm, sk_perm)
	s_q, s_k = q.shape[0], k.shape[0]
	active = build_active_set(*tile_counts(s_q, s_k, cfg), cfg.r)

	scores = _scores_densos(q, k, bias, sq_perm, sk_perm, cfg.scale(q.shape[1]))
	scores = np.where(active_mask(active, s_q, s_k, cfg.b_row, cfg.b_col), scores, -np.inf)
	return check_finite(matmul(_softmax_linhas(scores), v), nome="atenção mascarada")


def attention_recall(q, k, bias: BiasTables, sq_perm: Permutation, sk_perm: Permutation, cfg: AShapeConfig) -> float:
	"""Fração média da massa do softmax denso que cai nos tiles ativos."""
	v = np.zeros((np.shape(k)[0], 1), dtype=np.float32)
	q, k, _ = _validar(q, k, v, bias, sq_perm, sk_perm)
	s_q, s_k = q.shape[0], k.shape[0]
	active = build_active_set(*tile_counts(s_q, s_k, cfg), cfg.r)

	p = _softmax_linhas(_scores_densos(q, k, bias, sq_perm, sk_perm, cfg.scale(q.shape[1])))
	mascara = active_mask(active, s_q, s_k, cfg.b_row, cfg.b_col)
	return float(np.mean(np.sum(np.where(mascara, p, 0.0), axis=1, dtype=np.float64)))


def _exp_guardado(x: np.ndarray) -> np.ndarray:
	# exp(-inf) = 0 e nunca NaN (o caso -inf - (-inf) também vira 0)
	with np.errstate(invalid="ignore"):
		return np.where(np.isnan(x) | np.isneginf(x), np.float32(0.0), np.exp(x)).astype(np.float32)


def ashape_attention(q, k, v, bias: BiasTables, sq_perm: Permutation, sk_perm: Permutation, cfg: AShapeConfig) -> Tensor:
	q, k, v = _validar(q, k, v, bias, sq_perm, sk_perm)
	s_q, d = q.shape
	s_k = k.shape[0]
	tau = np.float32(cfg.scale(d))

	t_row, t_col = tile_counts(s_q, s_k, cfg)
	active = build_active_set(t_row, t_col, cfg.r)

	kt = np.ascontiguousarray(k.T)
	# índice espacial global da chave: σ_K(j·B_col + col)
	chave_linha = sk_perm.forward // bias.w
	chave_coluna = sk_perm.forward % bias.w

	out = np.empty((s_q, v.shape[1]), dtype=np.float32)

	for i in range(t_row):
		linhas = slice(i * cfg.b_row, min((i + 1) * cfg.b_row, s_q))
		q_i = q[linhas]
		espacial_q = sq_perm.forward[linhas]
		bh_i = bias.bh[espacial_q]
		bw_i = bias.bw[espacial_q]

		n_linhas = q_i.shape[0]
		m = np.full(n_linhas, -np.inf, dtype=np.float32)
		ell = np.zeros(n_linhas, dtype=np.float32)
		acc = np.zeros((n_linhas, v.shape[1]), dtype=np.float32)

		for j in active.sets[i]:
			inicio = j * cfg.b_col
			fim = min(inicio + cfg.b_col, s_k)
			validas = fim - inicio

			s = _produto(q_i, kt[:, inicio:fim])
			s += (bh_i[:, chave_linha[inicio:fim]] + bw_i[:, chave_coluna[inicio:fim]]) / tau
			v_j = v[inicio:fim]

			if validas < cfg.b_col:
				s = np.concatenate([s, np.full((n_linhas, cfg.b_col - validas), -np.inf, np.float32)], axis=1)
				v_j = np.concatenate([v_j, np.zeros((cfg.b_col - validas, v.shape[1]), np.float32)])

			m_novo = np.maximum(m, s.max(axis=1))
			p = _exp_guardado(tau * (s - m_novo[:, None]))
			alpha = _exp_guardado(tau * (m - m_novo))

			ell = alpha * ell + p.sum(axis=1)
			acc = alpha[:, None] * acc + _produto(p, v_j)
			m = m_novo

		if np.any(ell <= 0):
			raise RuntimeError(f"linha totalmente mascarada no tile {i}: invariante do tile diagonal violado")

		out[linhas] = acc / ell[:, None]

	logger.debug(
		"ashape: S_q=%d S_k=%d tiles=%dx%d r=%.3f pares=%d", s_q, s_k, t_row, t_col, cfg.r, active.tile_pairs()
	)
	return check_finite(out, nome="atenção A-shape")


def attention_bench(
	n: int,
	d: int,
	densities: Sequence[float],
	repeats: int,
	tile: int = TILE_GLOBAL,
	seed: int = 0,
) -> list[BenchRow]:
	"""
	Mede o kernel A-shape numa instância global N×d. O speedup é relativo
	à execução do próprio kernel com r = 1.
	"""
	w = math.isqrt(n)
	if w * w != n:
		raise ConfigError(f"n={n} precisa ser um quadrado perfeito (grade w×w)")

	rng = Rng(seed)
	q, k, v = (rng.normal((n, d)) for _ in range(3))
	bias = BiasTables(rng.normal((n, w), 0.1), rng.normal((n, w), 0.1), w)
	sigma = morton_order(GridShape(w, w))

	def medir(r: float) -> float:
		cfg = AShapeConfig(tile, tile, r)
		tempos = []
		for _ in range(max(1, repeats)):
			inicio = time.perf_counter()
			ashape_attention(q, k, v, bias, sigma, sigma, cfg)
			tempos.append((time.perf_counter() - inicio) * 1000.0)
		return statistics.median(tempos)

	t_row, t_col = tile_counts(n, n, AShapeConfig(tile, tile))
	medidos = {float(r): medir(float(r)) for r in densities}
	base = medidos[1.0] if 1.0 in medidos else medir(1.0)

	return [
		{
			"density": r,
			"achieved_density": achieved_density(t_row, t_col, r),
			"median_ms": ms,
			"speedup": base / ms,
		}
		for r, ms in medidos.items()
	]


def decomposed_bias(q, rel_pos_h, rel_pos_w, w: int) -> BiasTables:
	"""
	Tabelas de viés no estilo do encoder do SAM a partir de queries em ordem
	espacial (grade w×w) e das tabelas relativas aprendidas (2w-1)×d_head:
	bh[q, k_row] = q · Rh[q_row - k_row + w - 1] (idem para colunas).
	"""
	q = as_tensor(q, nome="q")
	rel_pos_h = as_tensor(rel_pos_h, nome="rel_pos_h")
	rel_pos_w = as_tensor(rel_pos_w, nome="rel_pos_w")

	if q.ndim != 2 or q.shape[0] != w * w:
		raise ShapeError(f"q deve ser (w²)×d com w={w}, recebido {q.shape}")

	esperado = (2 * w - 1, q.shape[1])
	if rel_pos_h.shape != esperado or rel_pos_w.shape != esperado:
		raise ShapeError(f"tabelas relativas devem ser {esperado}, recebido {rel_pos_h.shape}/{rel_pos_w.shape}")

	coords = np.arange(w)
	relativo = coords[:, None] - coords[None, :] + (w - 1)
	rh = rel_pos_h[relativo]
	rw = rel_pos_w[relativo]

	q_grade = q.reshape(w, w, -1)
	bh = np.einsum("yxc,ykc->yxk", q_grade, rh).reshape(w * w, w)
	bw = np.einsum("yxc,xkc->yxk", q_grade, rw).reshape(w * w, w)
	return BiasTables(bh.astype(np.float32), bw.astype(np.float32), w)
