"""
Encoder ViT de brinquedo com a disposição local/global do encoder do SAM:
permutação por listras, atenção A-shape com viés posicional decomposto e
MLP roteado, mais o gêmeo denso usado como oráculo.
"""
import dataclasses
import logging
import math
import statistics
import time

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from .attention import (
	TILE_GLOBAL, TILE_LOCAL, AShapeConfig, ashape_attention,
	build_active_set, decomposed_bias, tile_counts,
)
from .data import BenchRow, CostRow
from .errors import ConfigError, DivisibilityError, ShapeError
from .grid import GridShape, Permutation, apply_permutation, invert, morton_order
from .mlp import BypassMode, MlpWeights, RouterConfig, mlp_forward, route_mlp
from .saliency import Granularity, OrderingConfig, SaliencyMap, importance_order, sobel_magnitude
from .stripesort import StripeConfig, StripeVariant, stripe_sort
from .tensor import Rng, Tensor, as_tensor, layernorm, matmul

logger = logging.getLogger(__name__)


class BlockKind(str, Enum):
	LOCAL = "local"
	GLOBAL = "global"


class Modo(str, Enum):
	DENSE = "dense"
	SPARSE = "sparse"


def _lista(texto: str, conversor: Callable[[str], object]) -> tuple:
	return tuple(conversor(parte.strip()) for parte in texto.split(",") if parte.strip())


@dataclass(frozen=True)
class EncoderConfig:
	grid: GridShape = GridShape(64, 64)
	d: int = 64
	heads: int = 4
	window: int = 14
	layout: tuple[BlockKind, ...] = (BlockKind.LOCAL, BlockKind.LOCAL, BlockKind.GLOBAL)
	density: tuple[float, ...] = (1.0,)
	keep_fraction: tuple[float, ...] = (1.0,)
	stripe: StripeConfig = StripeConfig()
	ordering: OrderingConfig = OrderingConfig()
	tile_local: int = TILE_LOCAL
	tile_global: int = TILE_GLOBAL
	mlp_ratio: int = 4
	bypass_mode: BypassMode = BypassMode.IDENTITY
	seed: int = 0

	def __post_init__(self):
		object.__setattr__(self, "layout", tuple(BlockKind(k) for k in self.layout))
		object.__setattr__(self, "bypass_mode", BypassMode(self.bypass_mode))

		n_blocos = len(self.layout)
		if n_blocos == 0:
			raise ConfigError("layout precisa de pelo menos um bloco")

		# um único valor vale para todos os blocos
		for nome in ("density", "keep_fraction"):
			valores = tuple(float(v) for v in getattr(self, nome))
			if len(valores) == 1:
				valores = valores * n_blocos
			if len(valores) != n_blocos:
				raise ConfigError(f"{nome} tem {len(valores)} valores para {n_blocos} blocos")
			object.__setattr__(self, nome, valores)

		if self.d < 1 or self.heads < 1:
			raise ConfigError(f"d e heads devem ser >= 1, recebido d={self.d} heads={self.heads}")

		if self.d % self.heads:
			raise DivisibilityError(self.d, self.heads, "heads")

		if self.window < 1 or self.mlp_ratio < 1:
			raise ConfigError(f"window e mlp_ratio devem ser >= 1, recebido {self.window}/{self.mlp_ratio}")

		if not 0 <= self.seed < 2**64:
			raise ConfigError(f"seed fora de u64: {self.seed}")

		for b in range(n_blocos):
			self.ashape(b)
			self.router(b)

		if BlockKind.LOCAL in self.layout:
			self._checar_sequencia(self.window * self.window)

		if BlockKind.GLOBAL in self.layout:
			if self.grid.h != self.grid.w:
				raise ConfigError(f"blocos globais precisam de grade quadrada, recebido {self.grid}")
			self._checar_sequencia(self.grid.n())

	def _checar_sequencia(self, n: int):
		self.stripe.check(n)
		if self.ordering.granularity is Granularity.ZGROUP and n % self.ordering.group_size:
			raise DivisibilityError(n, self.ordering.group_size, "group_size")

	@property
	def head_dim(self) -> int:
		return self.d // self.heads

	@property
	def hidden(self) -> int:
		return self.d * self.mlp_ratio

	def ashape(self, bloco: int) -> AShapeConfig:
		tile = self.tile_local if self.layout[bloco] is BlockKind.LOCAL else self.tile_global
		return AShapeConfig(tile, tile, self.density[bloco])

	def router(self, bloco: int) -> RouterConfig:
		return RouterConfig(self.keep_fraction[bloco], self.bypass_mode)

	def lado_bias(self, bloco: int) -> int:
		return self.window if self.layout[bloco] is BlockKind.LOCAL else self.grid.w

	def with_density(self, r: float) -> "EncoderConfig":
		return dataclasses.replace(self, density=(float(r),) * len(self.layout))

	@classmethod
	def from_dict(cls, config: Mapping[str, str]) -> "EncoderConfig":
		conhecidas = {
			"grid", "d", "heads", "window", "layout", "density", "keep_fraction", "g", "variant",
			"granularity", "group_size", "tile_local", "tile_global", "mlp_ratio", "bypass_mode", "seed",
		}
		desconhecidas = sorted(set(config) - conhecidas)
		if desconhecidas:
			raise ConfigError(f"chaves desconhecidas na configuração: {', '.join(desconhecidas)}")

		padrao = cls()
		try:
			layout = _lista(config["layout"], BlockKind) if "layout" in config else padrao.layout
			return cls(
				grid=GridShape.parse(config["grid"]) if "grid" in config else padrao.grid,
				d=int(config.get("d", padrao.d)),
				heads=int(config.get("heads", padrao.heads)),
				window=int(config.get("window", padrao.window)),
				layout=layout,
				density=_lista(config.get("density", "1.0"), float),
				keep_fraction=_lista(config.get("keep_fraction", "1.0"), float),
				stripe=StripeConfig(
					int(config.get("g", padrao.stripe.g)),
					StripeVariant(config.get("variant", padrao.stripe.variant.value)),
				),
				ordering=OrderingConfig(
					Granularity(config.get("granularity", padrao.ordering.granularity.value)),
					int(config.get("group_size", padrao.ordering.group_size)),
				),
				tile_local=int(config.get("tile_local", padrao.tile_local)),
				tile_global=int(config.get("tile_global", padrao.tile_global)),
				mlp_ratio=int(config.get("mlp_ratio", padrao.mlp_ratio)),
				bypass_mode=BypassMode(config.get("bypass_mode", padrao.bypass_mode.value)),
				seed=int(config.get("seed", padrao.seed)),
			)
		except ConfigError:
			raise
		except ValueError as e:
			raise ConfigError(f"valor inválido na configuração: {e}") from e

	def to_dict(self) -> dict[str, str]:
		return {
			"grid": str(self.grid),
			"d": str(self.d),
			"heads": str(self.heads),
			"window": str(self.window),
			"layout": ",".join(k.value for k in self.layout),
			"density": ",".join(repr(r) for r in self.density),
			"keep_fraction": ",".join(repr(f) for f in self.keep_fraction),
			"g": str(self.stripe.g),
			"variant": self.stripe.variant.value,
			"granularity": self.ordering.granularity.value,
			"group_size": str(self.ordering.group_size),
			"tile_local": str(self.tile_local),
			"tile_global": str(self.tile_global),
			"mlp_ratio": str(self.mlp_ratio),
			"bypass_mode": self.bypass_mode.value,
			"seed": str(self.seed),
		}


@dataclass(frozen=True)
class BlockWeights:
	norm_gamma: Tensor
	norm_beta: Tensor
	qkv_w: Tensor
	qkv_b: Tensor
	proj_w: Tensor
	proj_b: Tensor
	rel_pos_h: Tensor
	rel_pos_w: Tensor
	mlp: MlpWeights

	def __post_init__(self):
		for nome in ("norm_gamma", "norm_beta", "qkv_w", "qkv_b", "proj_w", "proj_b", "rel_pos_h", "rel_pos_w"):
			object.__setattr__(self, nome, as_tensor(getattr(self, nome), nome=nome))

	def check(self, cfg: EncoderConfig, bloco: int):
		d, hd = cfg.d, cfg.head_dim
		lado = cfg.lado_bias(bloco)
		esperado = {
			"norm_gamma": (d,), "norm_beta": (d,),
			"qkv_w": (d, 3 * d), "qkv_b": (3 * d,),
			"proj_w": (d, d), "proj_b": (d,),
			"rel_pos_h": (2 * lado - 1, hd), "rel_pos_w": (2 * lado - 1, hd),
		}
		for nome, forma in esperado.items():
			if getattr(self, nome).shape != forma:
				raise ShapeError(f"bloco {bloco}: {nome} deve ser {forma}, recebido {getattr(self, nome).shape}")

		if self.mlp.d != d or self.mlp.hidden != cfg.hidden:
			raise ShapeError(f"bloco {bloco}: MLP {self.mlp.d}x{self.mlp.hidden}, esperado {d}x{cfg.hidden}")


def init_weights(cfg: EncoderConfig) -> list[BlockWeights]:
	"""Pesos aleatórios determinísticos (semente da configuração), um conjunto por bloco."""
	base = Rng(cfg.seed)
	d, hd = cfg.d, cfg.head_dim
	pesos = []

	for b in range(len(cfg.layout)):
		rng = base.spawn(b + 1)
		lado = cfg.lado_bias(b)
		pesos.append(BlockWeights(
			(1.0 + rng.normal((d,), 0.1)).astype(np.float32),
			rng.normal((d,), 0.02),
			rng.normal((d, 3 * d), 1.0 / math.sqrt(d)),
			rng.normal((3 * d,), 0.02),
			rng.normal((d, d), 1.0 / math.sqrt(d)),
			rng.normal((d,), 0.02),
			rng.normal((2 * lado - 1, hd), 0.1),
			rng.normal((2 * lado - 1, hd), 0.1),
			MlpWeights.random(rng, d, cfg.hidden),
		))

	return pesos


def zero_weights(cfg: EncoderConfig) -> list[BlockWeights]:
	d, hd = cfg.d, cfg.head_dim
	z = np.zeros
	return [
		BlockWeights(
			np.ones(d, np.float32), z(d, np.float32),
			z((d, 3 * d), np.float32), z(3 * d, np.float32),
			z((d, d), np.float32), z(d, np.float32),
			z((2 * cfg.lado_bias(b) - 1, hd), np.float32),
			z((2 * cfg.lado_bias(b) - 1, hd), np.float32),
			MlpWeights.zeros(d, cfg.hidden),
		)
		for b in range(len(cfg.layout))
	]


def _grade_janelas(grid: GridShape, window: int) -> tuple[int, int]:
	return math.ceil(grid.h / window), math.ceil(grid.w / window)


def window_partition(t: np.ndarray, window: int) -> np.ndarray:
	"""H×W×C → (n_janelas, window², C), com padding zero nas bordas irregulares."""
	h, w, c = t.shape
	nh, nw = math.ceil(h / window), math.ceil(w / window)
	pad = np.zeros((nh * window, nw * window, c), dtype=t.dtype)
	pad[:h, :w] = t
	janelas = pad.reshape(nh, window, nw, window, c).transpose(0, 2, 1, 3, 4)
	return np.ascontiguousarray(janelas.reshape(nh * nw, window * window, c))


def window_unpartition(janelas: np.ndarray, window: int, grid: GridShape) -> np.ndarray:
	"""Inverso de window_partition: remonta a grade com padding e recorta H×W."""
	nh, nw = _grade_janelas(grid, window)
	c = janelas.shape[-1]
	pad = janelas.reshape(nh, nw, window, window, c).transpose(0, 2, 1, 3, 4)
	pad = pad.reshape(nh * window, nw * window, c)
	return np.ascontiguousarray(pad[:grid.h, :grid.w])


def merge_window_orders(sigmas: Sequence[Permutation], grid: GridShape, window: int) -> Permutation:
	"""
	Junta os σ de cada janela numa única ordem sobre os N tokens válidos:
	ordena por (posição entre os tokens válidos da janela, índice da janela).
	Tokens de padding são descartados.
	"""
	nh, nw = _grade_janelas(grid, window)
	if len(sigmas) != nh * nw:
		raise ShapeError(f"esperado {nh * nw} ordens de janela, recebido {len(sigmas)}")

	tokens, postos, indices = [], [], []
	for idx, sigma in enumerate(sigmas):
		wy, wx = divmod(idx, nw)
		ly, lx = np.divmod(sigma.forward, window)
		gy, gx = wy * window + ly, wx * window + lx
		validos = (gy < grid.h) & (gx < grid.w)

		t = gy[validos] * grid.w + gx[validos]
		tokens.append(t)
		postos.append(np.arange(t.size))
		indices.append(np.full(t.size, idx))

	tokens = np.concatenate(tokens)
	ordem = np.lexsort((np.concatenate(indices), np.concatenate(postos)))
	return Permutation(tokens[ordem])


@dataclass(frozen=True)
class OrdensTokens:
	"""σ por janela (blocos locais), a ordem local fundida e o σ global."""
	janelas: tuple[Permutation, ...] = ()
	local: Permutation | None = None
	global_: Permutation | None = None

	def mlp(self, kind: BlockKind) -> Permutation:
		return self.local if kind is BlockKind.LOCAL else self.global_


def _sigma(m: SaliencyMap, cfg: EncoderConfig) -> Permutation:
	pi = importance_order(m, cfg.ordering)
	morton = morton_order(m.shape) if cfg.stripe.variant is StripeVariant.NO_SORT else None
	return stripe_sort(pi, cfg.stripe, morton)


def compute_orders(x, cfg: EncoderConfig) -> OrdensTokens:
	"""Saliência e σ calculados uma única vez a partir da entrada do encoder."""
	saliencia = sobel_magnitude(x)

	janelas: tuple[Permutation, ...] = ()
	local = None
	if BlockKind.LOCAL in cfg.layout:
		ws = cfg.window
		partes = window_partition(saliencia.m[:, :, None], ws)
		janelas = tuple(_sigma(SaliencyMap.from_tensor(p.reshape(ws, ws)), cfg) for p in partes)
		local = merge_window_orders(janelas, cfg.grid, ws)

	global_ = _sigma(saliencia, cfg) if BlockKind.GLOBAL in cfg.layout else None

	logger.debug("ordens calculadas: %d janelas, global=%s", len(janelas), global_ is not None)
	return OrdensTokens(janelas, local, global_)


@dataclass(frozen=True)
class BlockCost:
	block: int
	kind: BlockKind
	tile_pairs: int
	tile_pairs_total: int
	mlp_rows: int
	mlp_rows_total: int
	wall_ms: float

	@property
	def attention_density(self) -> float:
		return self.tile_pairs / self.tile_pairs_total

	@property
	def mlp_density(self) -> float:
		return self.mlp_rows / self.mlp_rows_total

	def row(self) -> CostRow:
		return {
			"block": self.block,
			"kind": self.kind.value,
			"tile_pairs": self.tile_pairs,
			"tile_pairs_total": self.tile_pairs_total,
			"attention_density": self.attention_density,
			"mlp_rows": self.mlp_rows,
			"mlp_rows_total": self.mlp_rows_total,
			"mlp_density": self.mlp_density,
			"wall_ms": self.wall_ms,
		}


@dataclass
class CostReport:
	blocks: list[BlockCost] = field(default_factory=list)

	def rows(self) -> list[CostRow]:
		return [b.row() for b in self.blocks]

	def attention_density(self) -> float:
		return sum(b.tile_pairs for b in self.blocks) / sum(b.tile_pairs_total for b in self.blocks)

	def wall_ms(self) -> float:
		return sum(b.wall_ms for b in self.blocks)


# (bloco, tokens antes do MLP, pesos do MLP, σ do MLP, roteador)
Observador = Callable[[int, Tensor, MlpWeights, Permutation, RouterConfig], None]


def _atencao_sequencia(
	q: Tensor, k: Tensor, v: Tensor, rel_h: Tensor, rel_w: Tensor, lado: int,
	sigma: Permutation, cfg: AShapeConfig, modo: Modo,
) -> tuple[Tensor, int, int]:
	"""Uma cabeça sobre uma sequência espacial lado×lado; devolve a saída e os pares de tiles."""
	bias = decomposed_bias(q, rel_h, rel_w, lado)
	t_row, t_col = tile_counts(q.shape[0], k.shape[0], cfg)
	total = t_row * t_col

	if modo is Modo.DENSE:
		# gêmeo denso: mesmo kernel com r = 1 na ordem espacial
		ident = Permutation.identity(q.shape[0])
		denso = dataclasses.replace(cfg, r=1.0)
		return ashape_attention(q, k, v, bias, ident, ident, denso), total, total

	qp, kp, vp = (apply_permutation(sigma, t) for t in (q, k, v))
	saida = ashape_attention(qp, kp, vp, bias, sigma, sigma, cfg)
	pares = build_active_set(t_row, t_col, cfg.r).tile_pairs()
	return apply_permutation(invert(sigma), saida), pares, total


def _cabecas(qkv: Tensor, cfg: EncoderConfig):
	d, hd = cfg.d, cfg.head_dim
	for h in range(cfg.heads):
		yield h, tuple(np.ascontiguousarray(qkv[..., p * d + h * hd:p * d + (h + 1) * hd]) for p in range(3))


def _atencao(
	h: Tensor, w: BlockWeights, cfg: EncoderConfig, bloco: int, ordens: OrdensTokens, modo: Modo,
) -> tuple[Tensor, int, int]:
	"""Atenção multi-cabeça do bloco sobre os tokens normalizados (N×d, ordem espacial)."""
	ashape = cfg.ashape(bloco)
	pares = total = 0

	if cfg.layout[bloco] is BlockKind.GLOBAL:
		qkv = matmul(h, w.qkv_w) + w.qkv_b
		saida = np.empty((h.shape[0], cfg.d), dtype=np.float32)
		for c, (q, k, v) in _cabecas(qkv, cfg):
			o, p, t = _atencao_sequencia(q, k, v, w.rel_pos_h, w.rel_pos_w, cfg.grid.w, ordens.global_, ashape, modo)
			saida[:, c * cfg.head_dim:(c + 1) * cfg.head_dim] = o
			pares, total = pares + p, total + t
	else:
		ws = cfg.window
		janelas = window_partition(h.reshape(cfg.grid.h, cfg.grid.w, cfg.d), ws)
		saida_janelas = np.empty_like(janelas)
		for j, tokens in enumerate(janelas):
			qkv = matmul(tokens, w.qkv_w) + w.qkv_b
			for c, (q, k, v) in _cabecas(qkv, cfg):
				o, p, t = _atencao_sequencia(q, k, v, w.rel_pos_h, w.rel_pos_w, ws, ordens.janelas[j], ashape, modo)
				saida_janelas[j, :, c * cfg.head_dim:(c + 1) * cfg.head_dim] = o
				pares, total = pares + p, total + t
		saida = window_unpartition(saida_janelas, ws, cfg.grid).reshape(-1, cfg.d)

	return matmul(saida, w.proj_w) + w.proj_b, pares, total


def encoder_forward(
	x, w: Sequence[BlockWeights], cfg: EncoderConfig, mode: Modo = Modo.SPARSE, observador: Observador | None = None,
) -> tuple[Tensor, CostReport]:
	"""
	Cada bloco: x + proj(atenção(LN(x))) e depois o MLP (denso ou roteado).
	As ordens são calculadas uma vez a partir de x; a saída volta na ordem
	espacial original.
	"""
	mode = Modo(mode)
	x = as_tensor(x, nome="x")
	forma = (cfg.grid.h, cfg.grid.w, cfg.d)
	if x.shape != forma:
		raise ShapeError(f"entrada deve ser {forma}, recebido {x.shape}")

	if len(w) != len(cfg.layout):
		raise ConfigError(f"{len(w)} blocos de pesos para um layout de {len(cfg.layout)} blocos")

	for b, pesos in enumerate(w):
		pesos.check(cfg, b)

	ordens = compute_orders(x, cfg)
	tokens = x.reshape(-1, cfg.d)
	n = tokens.shape[0]
	relatorio = CostReport()

	for b, (kind, pesos) in enumerate(zip(cfg.layout, w)):
		inicio = time.perf_counter()

		normalizados = layernorm(tokens, pesos.norm_gamma, pesos.norm_beta)
		atencao, pares, total = _atencao(normalizados, pesos, cfg, b, ordens, mode)
		tokens = tokens + atencao

		sigma = ordens.mlp(kind)
		roteador = cfg.router(b)
		if observador is not None:
			observador(b, tokens, pesos.mlp, sigma, roteador)

		if mode is Modo.DENSE:
			tokens, _ = mlp_forward(tokens, pesos.mlp)
			linhas = n
		else:
			tokens = route_mlp(tokens, pesos.mlp, sigma, roteador)
			linhas = roteador.keep_count(n)

		custo = BlockCost(b, kind, pares, total, linhas, n, (time.perf_counter() - inicio) * 1000.0)
		relatorio.blocks.append(custo)
		logger.debug(
			"bloco %d (%s, %s): pares %d/%d, linhas MLP %d/%d, %.1f ms",
			b, kind.value, mode.value, pares, total, linhas, n, custo.wall_ms,
		)

	return tokens.reshape(forma), relatorio


def bench(cfg: EncoderConfig, densities: Sequence[float], repeats: int, x=None) -> list[BenchRow]:
	"""
	Mediana do tempo do encoder por densidade; speedup relativo ao modo denso
	com a mesma configuração e a densidade alcançada somada sobre os blocos.
	"""
	if x is None:
		x = Rng(cfg.seed).normal((cfg.grid.h, cfg.grid.w, cfg.d))
	pesos = init_weights(cfg)

	def medir(c: EncoderConfig, modo: Modo) -> tuple[float, CostReport]:
		tempos = []
		relatorio = CostReport()
		for _ in range(max(1, repeats)):
			inicio = time.perf_counter()
			_, relatorio = encoder_forward(x, pesos, c, modo)
			tempos.append((time.perf_counter() - inicio) * 1000.0)
		return statistics.median(tempos), relatorio

	base, _ = medir(cfg, Modo.DENSE)
	linhas: list[BenchRow] = []
	for r in densities:
		ms, relatorio = medir(cfg.with_density(r), Modo.SPARSE)
		linhas.append({
			"density": float(r),
			"achieved_density": relatorio.attention_density(),
			"median_ms": ms,
			"speedup": base / ms,
		})
		logger.info("bench do encoder: r=%.3f %.1f ms (denso %.1f ms)", r, ms, base)

	return linhas
