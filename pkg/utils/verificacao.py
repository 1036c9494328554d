"""
Suítes de verificação contra oráculos densos, usadas pelo comando `verify`.
Cada suíte devolve um ResultadoSuite; exceções viram falha com o motivo.
"""
import logging
import math

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .attention import (
	AShapeConfig, BiasTables, achieved_density, ashape_attention, attention_recall,
	dense_attention_ref, masked_dense_attention,
)
from .encoder import EncoderConfig, BlockKind, Modo, encoder_forward, init_weights
from .grid import GridShape, Permutation, apply_permutation, invert
from .mlp import MlpWeights, RouterConfig, mlp_forward, route_mlp
from .saliency import Granularity, OrderingConfig, SaliencyMap, importance_order
from .stripesort import StripeConfig, block_members, stripe_sort
from .tensor import Rng, contar_operacoes, max_rel_error

logger = logging.getLogger(__name__)

TOL_KERNEL = 1e-4
TOL_SOFTMAX = 1e-5
CASOS_PERMUTACAO = 1000
CASOS_DENSIDADE = 100
CASOS_MASCARA = 20
DENSIDADES_MASCARA = (0.0, 0.25, 0.5)


@dataclass(frozen=True)
class ResultadoSuite:
	nome: str
	passou: bool
	detalhe: str


@dataclass(frozen=True)
class Instancia:
	q: np.ndarray
	k: np.ndarray
	v: np.ndarray
	bias: BiasTables
	sq_perm: Permutation
	sk_perm: Permutation
	tile: int


def instancia_aleatoria(rng: Rng, s_max: int = 256, d_max: int = 64) -> Instancia:
	"""S_q, S_k <= s_max (S_k quadrado perfeito), d <= d_max, tabelas de viés aleatórias."""
	w = int(rng.integers(2, int(np.sqrt(s_max)) + 1))
	s_k = w * w
	s_q = int(rng.integers(1, s_max + 1))
	d = int(rng.integers(1, d_max + 1))
	tile = (16, 32, 64)[int(rng.integers(0, 3))]

	return Instancia(
		rng.normal((s_q, d)),
		rng.normal((s_k, d)),
		rng.normal((s_k, d)),
		BiasTables(rng.normal((s_q, w), 0.5), rng.normal((s_q, w), 0.5), w),
		Permutation(rng.permutation(s_q)),
		Permutation(rng.permutation(s_k)),
		tile,
	)


def _kernel_denso(rng: Rng, casos: int) -> ResultadoSuite:
	pior = 0.0
	for _ in range(casos):
		i = instancia_aleatoria(rng)
		cfg = AShapeConfig(i.tile, i.tile, 1.0)
		obtido = ashape_attention(i.q, i.k, i.v, i.bias, i.sq_perm, i.sk_perm, cfg)
		esperado = dense_attention_ref(i.q, i.k, i.v, i.bias, i.sq_perm, i.sk_perm, cfg.scale(i.q.shape[1]))
		pior = max(pior, max_rel_error(obtido, esperado))

	return ResultadoSuite("kernel r=1 vs denso", pior <= TOL_KERNEL, f"{casos} casos, erro máx {pior:.2e}")


def _oraculo_mascarado(rng: Rng, casos: int) -> ResultadoSuite:
	pior = 0.0
	for r in DENSIDADES_MASCARA:
		for _ in range(casos):
			i = instancia_aleatoria(rng)
			cfg = AShapeConfig(i.tile, i.tile, r)
			obtido = ashape_attention(i.q, i.k, i.v, i.bias, i.sq_perm, i.sk_perm, cfg)
			esperado = masked_dense_attention(i.q, i.k, i.v, i.bias, i.sq_perm, i.sk_perm, cfg)
			pior = max(pior, max_rel_error(obtido, esperado))

	return ResultadoSuite(
		"kernel vs oráculo mascarado", pior <= TOL_KERNEL,
		f"r em {list(DENSIDADES_MASCARA)}, {casos} casos cada, erro máx {pior:.2e}",
	)


def densidade_bruta(t_row: int, t_col: int, r: float) -> float:
	prefixo = math.floor(r * t_col)
	pares = sum(
		1
		for i in range(t_row)
		for j in range(t_col)
		if j < prefixo or j == min(i, t_col - 1)
	)
	return pares / (t_row * t_col)


def _densidade(rng: Rng, casos: int) -> ResultadoSuite:
	if achieved_density(8, 8, 0.25) != 0.34375:
		return ResultadoSuite("contagem de densidade", False, f"achieved_density(8,8,0.25)={achieved_density(8, 8, 0.25)}")

	for _ in range(casos):
		t_row, t_col = int(rng.integers(1, 33)), int(rng.integers(1, 33))
		# r em múltiplos de 1/64 para o floor não depender de arredondamento
		r = int(rng.integers(0, 65)) / 64
		if achieved_density(t_row, t_col, r) != densidade_bruta(t_row, t_col, r):
			return ResultadoSuite("contagem de densidade", False, f"divergência em ({t_row}, {t_col}, {r})")

	return ResultadoSuite("contagem de densidade", True, f"8x8 r=0.25 -> 0.34375, {casos} triplas")


def _permutacoes(rng: Rng, casos: int) -> ResultadoSuite:
	for caso in range(casos):
		g = int(rng.integers(1, 9))
		n = g * int(rng.integers(1, 65))
		pi = Permutation(rng.permutation(n))
		sigma = stripe_sort(pi, StripeConfig(g))

		oraculo = pi.forward.reshape(n // g, g).T.flatten()
		if not np.array_equal(sigma.forward, oraculo):
			return ResultadoSuite("leis de permutação", False, f"caso {caso}: σ difere do oráculo")

		if not np.array_equal(np.sort(sigma.forward), np.arange(n)):
			return ResultadoSuite("leis de permutação", False, f"caso {caso}: σ não é bijeção")

		t = rng.normal((n, 3))
		if not np.array_equal(apply_permutation(invert(sigma), apply_permutation(sigma, t)), t):
			return ResultadoSuite("leis de permutação", False, f"caso {caso}: apply∘invert não é identidade")

		if sigma.compose(invert(sigma)) != Permutation.identity(n):
			return ResultadoSuite("leis de permutação", False, f"caso {caso}: σ∘σ⁻¹ não é identidade")

	return ResultadoSuite("leis de permutação", True, f"{casos} configurações")


def _deslocamento_fase(lados=(4, 8, 16), g: int = 4) -> ResultadoSuite:
	for lado in lados:
		forma = GridShape(lado, lado)
		uniforme = SaliencyMap(forma, np.ones((lado, lado), np.float32))
		for granularidade in Granularity:
			pi = importance_order(uniforme, OrderingConfig(granularidade, 4))
			sigma = stripe_sort(pi, StripeConfig(g))

			fases = set()
			for membros in block_members(sigma, g):
				y, x = forma.to_coords(np.fromiter(membros, dtype=np.int64))
				fase = set(zip((y % 2).tolist(), (x % 2).tolist()))
				if len(fase) != 1:
					return ResultadoSuite("deslocamento de fase", False, f"{lado}x{lado}: bloco com fases {sorted(fase)}")
				fases |= fase

			if len(fases) != g:
				return ResultadoSuite("deslocamento de fase", False, f"{lado}x{lado}: fases repetidas entre blocos")

	return ResultadoSuite("deslocamento de fase", True, f"H=W em {list(lados)}, G={g}")


def _roteamento(rng: Rng) -> ResultadoSuite:
	n, d, oculto = 64, 16, 64
	x = rng.normal((n, d))
	pesos = MlpWeights.random(rng, d, oculto)
	sigma = Permutation(rng.permutation(n))

	with contar_operacoes() as denso:
		y_denso, _ = mlp_forward(x, pesos)

	cfg = RouterConfig(0.25)
	with contar_operacoes() as roteado:
		y_roteado = route_mlp(x, pesos, sigma, cfg)

	k = cfg.keep_count(n)
	keep = sigma.forward[:k]
	if not np.array_equal(y_roteado[keep], y_denso[keep]):
		return ResultadoSuite("roteamento do MLP", False, "linhas do keep-set diferem do MLP denso")

	if not np.array_equal(route_mlp(x, pesos, sigma, RouterConfig(1.0)), y_denso):
		return ResultadoSuite("roteamento do MLP", False, "keep_fraction=1 difere do MLP denso")

	if roteado.macs * n != denso.macs * k:
		return ResultadoSuite("roteamento do MLP", False, f"MACs {roteado.macs} != {k}/{n} de {denso.macs}")

	return ResultadoSuite("roteamento do MLP", True, f"K={k}/{n}, MACs {roteado.macs}/{denso.macs}")


def config_gemeo(seed: int) -> EncoderConfig:
	return EncoderConfig(
		grid=GridShape(16, 16), d=16, heads=2, window=8,
		layout=(BlockKind.LOCAL, BlockKind.LOCAL, BlockKind.GLOBAL),
		density=(1.0,), keep_fraction=(1.0,),
		tile_local=8, tile_global=32, seed=seed,
	)


def _gemeo(seed: int) -> ResultadoSuite:
	cfg = config_gemeo(seed)
	x = Rng(seed).normal((16, 16, cfg.d))
	pesos = init_weights(cfg)

	esparso, _ = encoder_forward(x, pesos, cfg, Modo.SPARSE)
	denso, _ = encoder_forward(x, pesos, cfg, Modo.DENSE)
	erro = max_rel_error(esparso, denso)
	return ResultadoSuite("gêmeo denso do encoder", erro <= TOL_KERNEL, f"16x16, 3 blocos, erro {erro:.2e}")


def _softmax(rng: Rng, casos: int) -> ResultadoSuite:
	pior_desloc = pior_soma = 0.0
	for _ in range(casos):
		i = instancia_aleatoria(rng, s_max=64, d_max=16)
		cfg = AShapeConfig(i.tile, i.tile, 0.5)
		base = ashape_attention(i.q, i.k, i.v, i.bias, i.sq_perm, i.sk_perm, cfg)

		c = np.float32(rng.normal((1,))[0] * 3.0)
		deslocado = BiasTables(i.bias.bh + c, i.bias.bw, i.bias.w)
		outro = ashape_attention(i.q, i.k, i.v, deslocado, i.sq_perm, i.sk_perm, cfg)
		pior_desloc = max(pior_desloc, max_rel_error(outro, base))

		# V = identidade expõe as probabilidades de cada linha
		ident = np.eye(i.k.shape[0], dtype=np.float32)
		p = ashape_attention(i.q, i.k, ident, i.bias, i.sq_perm, i.sk_perm, cfg)
		pior_soma = max(pior_soma, float(np.max(np.abs(p.sum(axis=1, dtype=np.float64) - 1.0))))
		if np.min(p) < 0:
			return ResultadoSuite("softmax", False, "probabilidade negativa")

	passou = pior_desloc <= TOL_SOFTMAX and pior_soma <= TOL_SOFTMAX
	return ResultadoSuite("softmax", passou, f"deslocamento {pior_desloc:.2e}, soma das linhas {pior_soma:.2e}")


def _recall(rng: Rng, casos: int) -> ResultadoSuite:
	for _ in range(casos):
		i = instancia_aleatoria(rng, s_max=64, d_max=16)
		anterior = -1.0
		for r in (0.0, 0.25, 0.5, 1.0):
			atual = attention_recall(i.q, i.k, i.bias, i.sq_perm, i.sk_perm, AShapeConfig(i.tile, i.tile, r))
			if atual < anterior - TOL_SOFTMAX:
				return ResultadoSuite("recall da atenção", False, f"recall caiu em r={r}")
			anterior = atual

		if abs(anterior - 1.0) > TOL_SOFTMAX:
			return ResultadoSuite("recall da atenção", False, f"recall em r=1 é {anterior}")

	return ResultadoSuite("recall da atenção", True, f"{casos} casos, monótono e 1 em r=1")


def _proteger(nome: str, suite: Callable[[], ResultadoSuite]) -> ResultadoSuite:
	try:
		return suite()
	except Exception as e:
		logger.debug("suíte %s falhou com exceção", nome, exc_info=True)
		return ResultadoSuite(nome, False, f"{type(e).__name__}: {e}")


def executar_suites(seed: int = 0, casos: int = 50) -> list[ResultadoSuite]:
	base = Rng(seed)
	suites: list[tuple[str, Callable[[], ResultadoSuite]]] = [
		("kernel r=1 vs denso", lambda: _kernel_denso(base.spawn(1), casos)),
		("kernel vs oráculo mascarado", lambda: _oraculo_mascarado(base.spawn(2), max(CASOS_MASCARA, casos // 2))),
		("contagem de densidade", lambda: _densidade(base.spawn(3), CASOS_DENSIDADE)),
		("leis de permutação", lambda: _permutacoes(base.spawn(4), CASOS_PERMUTACAO)),
		("deslocamento de fase", _deslocamento_fase),
		("roteamento do MLP", lambda: _roteamento(base.spawn(5))),
		("gêmeo denso do encoder", lambda: _gemeo(seed)),
		("softmax", lambda: _softmax(base.spawn(6), max(5, casos // 5))),
		("recall da atenção", lambda: _recall(base.spawn(7), max(5, casos // 5))),
	]

	resultados = []
	for nome, suite in suites:
		resultado = _proteger(nome, suite)
		logger.info("suíte %s: %s (%s)", nome, "ok" if resultado.passou else "FALHOU", resultado.detalhe)
		resultados.append(resultado)

	return resultados
