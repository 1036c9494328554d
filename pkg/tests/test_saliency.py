import numpy as np
import pytest

from numpy.testing import assert_allclose, assert_array_equal

from utils.errors import ConfigError, DivisibilityError, ShapeError
from utils.grid import GridShape, morton_order
from utils.saliency import (
	Granularity, OrderingConfig, SaliencyMap, group_energy, importance_order, sobel_magnitude,
)


def _sobel_manual(img: np.ndarray) -> np.ndarray:
	h, w = img.shape
	pad = np.pad(img.astype(np.float64), 1)
	gx = np.zeros((h, w))
	gy = np.zeros((h, w))
	kx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
	for y in range(h):
		for x in range(w):
			janela = pad[y:y + 3, x:x + 3]
			# convolução: núcleo espelhado
			gx[y, x] = np.sum(janela * kx[::-1, ::-1])
			gy[y, x] = np.sum(janela * kx.T[::-1, ::-1])
	return np.sqrt(gx * gx + gy * gy)


class TestSobel:
	def test_imagem_constante_interior_zero(self):
		m = sobel_magnitude(np.full((6, 6), 2.0))
		assert_array_equal(m.m[1:-1, 1:-1], 0.0)
		# padding zero cria bordas
		assert np.all(m.m[0, :] > 0)

	def test_confere_com_convolucao_manual(self, rng):
		img = rng.standard_normal((7, 9)).astype(np.float32)
		assert_allclose(sobel_magnitude(img).m, _sobel_manual(img), rtol=1e-5, atol=1e-5)

	def test_soma_sobre_canais_antes_do_quadrado(self, rng):
		canal = rng.standard_normal((5, 5)).astype(np.float32)
		duplicado = np.stack([canal, canal], axis=-1)
		assert_allclose(sobel_magnitude(duplicado).m, 2 * sobel_magnitude(canal).m, rtol=1e-5)

		oposto = np.stack([canal, -canal], axis=-1)
		assert_array_equal(sobel_magnitude(oposto).m, 0.0)

	def test_nao_negativa(self, rng):
		assert np.all(sobel_magnitude(rng.standard_normal((8, 8, 3))).m >= 0)

	def test_rank_invalido(self):
		with pytest.raises(ShapeError):
			sobel_magnitude(np.ones((2, 2, 2, 2)))


class TestSaliencyMap:
	def test_negativa_rejeitada(self):
		with pytest.raises(ConfigError):
			SaliencyMap(GridShape(1, 2), np.array([[1.0, -1.0]], np.float32))

	def test_forma_errada(self):
		with pytest.raises(ShapeError):
			SaliencyMap(GridShape(2, 2), np.ones((2, 3), np.float32))


class TestImportanceOrder:
	@pytest.mark.parametrize("granularidade", list(Granularity))
	def test_uniforme_igual_a_ordem_z(self, granularidade):
		forma = GridShape(8, 8)
		uniforme = SaliencyMap(forma, np.ones((8, 8), np.float32))
		assert importance_order(uniforme, OrderingConfig(granularidade, 4)) == morton_order(forma)

	def test_token_decrescente(self, rng):
		m = SaliencyMap.from_tensor(rng.random((4, 4)))
		pi = importance_order(m, OrderingConfig(Granularity.TOKEN))
		valores = m.flat()[pi.forward]
		assert np.all(np.diff(valores) <= 0)

	def test_pico_vem_primeiro(self):
		m = np.zeros((4, 4), np.float32)
		m[3, 2] = 5.0
		pi = importance_order(SaliencyMap.from_tensor(m), OrderingConfig(Granularity.TOKEN))
		assert pi.forward[0] == 3 * 4 + 2

	def test_zgroup_grupo_do_pico_primeiro(self):
		m = np.zeros((4, 4), np.float32)
		m[3, 3] = 1.0
		pi = importance_order(SaliencyMap.from_tensor(m), OrderingConfig(Granularity.ZGROUP, 4))
		assert sorted(pi.forward[:4].tolist()) == [10, 11, 14, 15]

	@pytest.mark.parametrize("granularidade", list(Granularity))
	def test_invariante_a_escala(self, rng, granularidade):
		m = SaliencyMap.from_tensor(rng.random((8, 8)))
		cfg = OrderingConfig(granularidade, 4)
		assert importance_order(m, cfg) == importance_order(m.scaled(4.0), cfg)

	def test_energia_indivisivel(self):
		m = SaliencyMap.from_tensor(np.ones((3, 3)))
		with pytest.raises(DivisibilityError):
			group_energy(m, morton_order(m.shape), 4)


class TestGroupEnergy:
	def test_campo_uniforme(self):
		m = SaliencyMap(GridShape(8, 8), np.ones((8, 8), np.float32))
		assert_array_equal(group_energy(m, morton_order(m.shape), 4), np.full(16, 4.0))

	def test_massa_pontual(self):
		m = np.zeros((8, 8), np.float32)
		m[5, 2] = 3.0
		energia = group_energy(SaliencyMap.from_tensor(m), morton_order(GridShape(8, 8)), 4)
		assert np.count_nonzero(energia) == 1
		assert energia.max() == 3.0

	def test_confere_com_soma_bruta(self, rng):
		forma = GridShape(8, 8)
		m = SaliencyMap.from_tensor(rng.random((8, 8)))
		morton = morton_order(forma)
		energia = group_energy(m, morton, 4)

		for grupo in range(16):
			membros = morton.forward[grupo * 4:(grupo + 1) * 4]
			y, x = forma.to_coords(membros)
			# grupos Z de 4 são blocos 2x2 alinhados
			assert len(set((y // 2).tolist())) == len(set((x // 2).tolist())) == 1
			assert energia[grupo] == pytest.approx(float(m.m[y, x].astype(np.float64).sum()), rel=1e-6)


class TestSobelPropriedades:
	def test_um_por_um(self):
		# só o próprio pixel sob o núcleo: os termos centrais do Sobel são zero
		assert_array_equal(sobel_magnitude(np.array([[5.0]])).m, _sobel_manual(np.array([[5.0]])))
		assert_array_equal(sobel_magnitude(np.array([[5.0]])).m, [[0.0]])

	@pytest.mark.parametrize("dy, dx", [(1, 2), (3, 0), (0, 4)])
	def test_equivariante_a_translacao_no_interior(self, rng, dy, dx):
		img = np.zeros((16, 16), np.float32)
		img[4:8, 4:8] = rng.standard_normal((4, 4))
		deslocada = np.roll(img, (dy, dx), axis=(0, 1))

		m = sobel_magnitude(img).m
		m_deslocada = sobel_magnitude(deslocada).m
		assert_allclose(m_deslocada[1:-1, 1:-1], np.roll(m, (dy, dx), axis=(0, 1))[1:-1, 1:-1], rtol=1e-6, atol=1e-6)
