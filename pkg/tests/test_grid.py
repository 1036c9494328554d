import numpy as np
import pytest

from numpy.testing import assert_array_equal

from utils.errors import PermutationError, ShapeError
from utils.grid import (
	GridShape, Permutation, apply_permutation, invert, morton_codes, morton_encode, morton_order,
)


class TestGridShape:
	def test_indices(self):
		g = GridShape(3, 5)
		assert g.n() == 15
		assert g.to_index(2, 4) == 14
		y, x = g.to_coords(np.array([0, 7, 14]))
		assert_array_equal(y, [0, 1, 2])
		assert_array_equal(x, [0, 2, 4])

	@pytest.mark.parametrize("texto, esperado", [("64x64", (64, 64)), ("16X8", (16, 8)), ("12", (12, 12))])
	def test_parse(self, texto, esperado):
		g = GridShape.parse(texto)
		assert (g.h, g.w) == esperado

	def test_extensao_invalida(self):
		with pytest.raises(ShapeError):
			GridShape(0, 4)


class TestPermutation:
	def test_inversa(self, rng):
		p = Permutation(rng.permutation(50))
		assert_array_equal(p.forward[p.inverse], np.arange(50))
		assert_array_equal(p.inverse[p.forward], np.arange(50))

	@pytest.mark.parametrize("forward", [[0, 0, 1], [0, 1, 3], [[0, 1]], [0.5, 1.0]])
	def test_nao_bijecao(self, forward):
		with pytest.raises(PermutationError):
			Permutation(forward)

	def test_somente_leitura(self):
		p = Permutation([1, 0])
		with pytest.raises(ValueError):
			p.forward[0] = 0

	def test_compose(self, rng):
		a = Permutation(rng.permutation(20))
		b = Permutation(rng.permutation(20))
		t = rng.standard_normal((20, 2)).astype(np.float32)
		composta = a.compose(b)
		assert_array_equal(apply_permutation(composta, t), apply_permutation(a, apply_permutation(b, t)))

	def test_tensor_ida_e_volta(self, rng):
		p = Permutation(rng.permutation(33))
		assert Permutation.from_tensor(p.to_tensor()) == p

	def test_identidade(self):
		assert Permutation.identity(4) == Permutation([0, 1, 2, 3])
		assert len(Permutation.identity(4)) == 4


class TestMorton:
	def test_bits_intercalados(self):
		assert morton_encode(0, 0) == 0
		assert morton_encode(1, 0) == 1
		assert morton_encode(0, 1) == 2
		assert morton_encode(3, 3) == 15
		assert morton_encode(2, 1) == 0b0110

	def test_blocos_2x2(self):
		ordem = morton_order(GridShape(4, 4))
		assert_array_equal(ordem.forward[:4], [0, 1, 4, 5])
		assert_array_equal(ordem.forward[4:8], [2, 3, 6, 7])

	def test_grade_nao_potencia_de_2(self):
		ordem = morton_order(GridShape(3, 5))
		assert sorted(ordem.forward.tolist()) == list(range(15))
		assert np.all(np.diff(morton_codes(GridShape(3, 5))[ordem.forward].astype(np.int64)) > 0)

	def test_coordenada_negativa(self):
		with pytest.raises(ShapeError):
			morton_encode(-1, 0)


class TestAplicarPermutacao:
	def test_ida_e_volta_bit_exata(self, rng):
		for _ in range(100):
			n = int(rng.integers(1, 200))
			p = Permutation(rng.permutation(n))
			t = rng.standard_normal((n, 3)).astype(np.float32)
			assert_array_equal(apply_permutation(invert(p), apply_permutation(p, t)), t)
			assert_array_equal(apply_permutation(p, apply_permutation(invert(p), t)), t)

	def test_forma_errada(self):
		with pytest.raises(ShapeError):
			apply_permutation(Permutation.identity(3), np.zeros((4, 2)))
