import dataclasses

import numpy as np
import pytest

from numpy.testing import assert_array_equal

from utils.attention import achieved_density
from utils.data import DataFiles, abrir_config
from utils.encoder import (
	BlockKind, EncoderConfig, Modo, bench, compute_orders, encoder_forward, init_weights,
	merge_window_orders, window_partition, window_unpartition, zero_weights,
)
from utils.errors import ConfigError, DivisibilityError, ShapeError
from utils.grid import GridShape, Permutation
from utils.mlp import RouterConfig
from utils.tensor import Rng, max_rel_error
from utils.verificacao import config_gemeo


@pytest.fixture
def cfg() -> EncoderConfig:
	return EncoderConfig.from_dict(abrir_config(DataFiles.CONFIG_TESTE.caminho))


@pytest.fixture
def x(cfg) -> np.ndarray:
	return Rng(17).normal((cfg.grid.h, cfg.grid.w, cfg.d))


class TestConfig:
	def test_arquivo_de_teste(self, cfg):
		assert cfg.grid == GridShape(16, 16)
		assert cfg.layout == (BlockKind.LOCAL, BlockKind.LOCAL, BlockKind.GLOBAL)
		assert cfg.density == (0.25, 0.25, 0.25)
		assert cfg.keep_fraction == (0.5, 0.5, 0.5)

	def test_arquivo_padrao(self):
		padrao = EncoderConfig.from_dict(abrir_config(DataFiles.CONFIG.caminho))
		assert padrao.grid.n() == 4096
		assert padrao.window == 14

	def test_ida_e_volta_pelo_dicionario(self, cfg):
		assert EncoderConfig.from_dict(cfg.to_dict()) == cfg

	def test_chave_desconhecida(self):
		with pytest.raises(ConfigError, match="desconhecidas"):
			EncoderConfig.from_dict({"grade": "8x8"})

	def test_valor_invalido(self):
		with pytest.raises(ConfigError):
			EncoderConfig.from_dict({"layout": "local,meio"})

	def test_heads_nao_divide_d(self):
		with pytest.raises(DivisibilityError):
			EncoderConfig(d=10, heads=4)

	def test_global_em_grade_retangular(self):
		with pytest.raises(ConfigError):
			EncoderConfig(grid=GridShape(8, 16), layout=(BlockKind.GLOBAL,), density=(1.0,), keep_fraction=(1.0,))

	def test_janela_indivisivel_por_g(self):
		with pytest.raises(DivisibilityError):
			EncoderConfig(grid=GridShape(9, 9), window=3, layout=(BlockKind.LOCAL,))

	def test_quantidade_de_densidades(self):
		with pytest.raises(ConfigError):
			EncoderConfig(density=(1.0, 0.5))


class TestJanelas:
	def test_ida_e_volta_com_padding(self, rng):
		t = rng.standard_normal((10, 13, 3)).astype(np.float32)
		janelas = window_partition(t, 4)
		assert janelas.shape == (3 * 4, 16, 3)
		assert_array_equal(window_unpartition(janelas, 4, GridShape(10, 13)), t)

	def test_padding_zero(self):
		janelas = window_partition(np.ones((3, 3, 1), np.float32), 2)
		assert janelas[3].reshape(-1).tolist() == [1.0, 0.0, 0.0, 0.0]

	def test_merge_cobre_todos_os_tokens(self):
		grid = GridShape(10, 10)
		sigmas = [Permutation(np.random.default_rng(i).permutation(16)) for i in range(9)]
		merged = merge_window_orders(sigmas, grid, 4)
		assert merged.n == 100

	def test_merge_intercala_janelas(self):
		grid = GridShape(2, 4)
		sigmas = [Permutation([3, 2, 1, 0]), Permutation([0, 1, 2, 3])]
		merged = merge_window_orders(sigmas, grid, 2)
		# posto 0 de cada janela, depois posto 1, ...
		assert merged.forward.tolist() == [5, 2, 4, 3, 1, 6, 0, 7]


class TestEncoderForward:
	def test_gemeo_denso_densidade_total(self):
		cfg = config_gemeo(0)
		x = Rng(1).normal((16, 16, cfg.d))
		pesos = init_weights(cfg)
		esparso, _ = encoder_forward(x, pesos, cfg, Modo.SPARSE)
		denso, _ = encoder_forward(x, pesos, cfg, Modo.DENSE)
		assert max_rel_error(esparso, denso) <= 1e-4

	@pytest.mark.parametrize("modo", list(Modo))
	def test_pesos_zero_identidade(self, cfg, x, modo):
		y, _ = encoder_forward(x, zero_weights(cfg), cfg, modo)
		assert_array_equal(y, x)

	def test_contabilidade_de_custo(self, cfg, x):
		_, relatorio = encoder_forward(x, init_weights(cfg), cfg, Modo.SPARSE)
		assert len(relatorio.blocks) == 3

		for custo in relatorio.blocks:
			# janelas 8x8 com tiles 8 e global 256 com tiles 32: 8x8 tiles em ambos
			assert custo.attention_density == achieved_density(8, 8, 0.25) == 0.34375
			assert custo.mlp_density == RouterConfig(0.5).keep_count(256) / 256
			assert custo.tile_pairs <= custo.tile_pairs_total
			assert custo.mlp_rows <= custo.mlp_rows_total

		assert relatorio.attention_density() == 0.34375
		assert [linha["kind"] for linha in relatorio.rows()] == ["local", "local", "global"]

	def test_denso_conta_tudo(self, cfg, x):
		_, relatorio = encoder_forward(x, init_weights(cfg), cfg, Modo.DENSE)
		assert all(c.attention_density == 1.0 and c.mlp_density == 1.0 for c in relatorio.blocks)

	def test_custo_monotono(self, cfg, x):
		pesos = init_weights(cfg)
		pares = []
		for r in (0.0, 0.25, 0.5, 1.0):
			_, relatorio = encoder_forward(x, pesos, cfg.with_density(r), Modo.SPARSE)
			pares.append(sum(c.tile_pairs for c in relatorio.blocks))
		assert pares == sorted(set(pares))

		linhas = []
		for f in (0.25, 0.5, 1.0):
			c = dataclasses.replace(cfg, keep_fraction=(f,))
			_, relatorio = encoder_forward(x, pesos, c, Modo.SPARSE)
			linhas.append(relatorio.blocks[0].mlp_rows)
		assert linhas == [64, 128, 256]

	def test_deterministico(self, cfg):
		pesos = init_weights(cfg)
		x = Rng(2).normal((16, 16, cfg.d))
		y, _ = encoder_forward(x, pesos, cfg, Modo.SPARSE)
		y2, _ = encoder_forward(x, pesos, cfg, Modo.SPARSE)
		assert_array_equal(y, y2)
		assert y.shape == x.shape

	def test_ordens_calculadas_da_entrada(self, cfg, x):
		ordens = compute_orders(x, cfg)
		assert len(ordens.janelas) == 4
		assert ordens.local.n == ordens.global_.n == 256

	def test_observador(self, cfg, x):
		vistos = []
		encoder_forward(x, init_weights(cfg), cfg, Modo.SPARSE, lambda b, t, w, s, r: vistos.append((b, t.shape, s.n)))
		assert vistos == [(0, (256, 16), 256), (1, (256, 16), 256), (2, (256, 16), 256)]

	def test_forma_errada(self, cfg):
		with pytest.raises(ShapeError):
			encoder_forward(np.ones((8, 8, cfg.d)), init_weights(cfg), cfg)

	def test_pesos_faltando(self, cfg, x):
		with pytest.raises(ConfigError):
			encoder_forward(x, init_weights(cfg)[:2], cfg)

	def test_janela_irregular(self):
		cfg = EncoderConfig(
			grid=GridShape(10, 10), d=8, heads=2, window=4,
			layout=(BlockKind.LOCAL,), density=(1.0,), keep_fraction=(1.0,), tile_local=8,
		)
		x = Rng(3).normal((10, 10, 8))
		pesos = init_weights(cfg)
		esparso, _ = encoder_forward(x, pesos, cfg, Modo.SPARSE)
		denso, _ = encoder_forward(x, pesos, cfg, Modo.DENSE)
		assert max_rel_error(esparso, denso) <= 1e-4


class TestBench:
	def test_linhas(self, cfg):
		linhas = bench(cfg, [0.25, 1.0], repeats=1)
		assert [l["density"] for l in linhas] == [0.25, 1.0]
		assert linhas[0]["achieved_density"] == 0.34375
		assert linhas[1]["achieved_density"] == 1.0
		assert all(l["speedup"] > 0 for l in linhas)

	@pytest.mark.lento
	def test_densidade_total_contra_denso(self):
		cfg = dataclasses.replace(config_gemeo(0), keep_fraction=(1.0,))
		linhas = bench(cfg, [1.0], repeats=5)
		assert 0.9 <= linhas[0]["speedup"] <= 1.1
