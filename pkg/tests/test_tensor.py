import math
import struct

import numpy as np
import pytest

from numpy.testing import assert_allclose, assert_array_equal

from utils.errors import (
	ArquivoError, BadDtypeError, BadMagicError, BadVersionError, ConfigError, NonFiniteError,
	ShapeError, TensorFormatError, TruncatedError,
)
from utils.tensor import (
	Rng, as_tensor, contar_operacoes, gelu, layernorm, matmul, max_rel_error, tensor_read, tensor_write,
)


class TestFormatoSptn:
	def test_tensor_de_um_elemento(self, tmp_path):
		caminho = tmp_path / "um.sptn"
		tensor_write(np.array([3.0], np.float32), str(caminho))

		bruto = caminho.read_bytes()
		assert bruto[:4] == b"SPTN"
		assert bruto[4:7] == bytes([1, 0, 1])
		assert bruto[7:10] == b"\x00\x00\x00"
		assert struct.unpack("<Q", bruto[10:18])[0] == 1
		assert len(bruto) == 18 + 4
		assert struct.unpack("<f", bruto[18:])[0] == 3.0

		assert_array_equal(tensor_read(str(caminho)), np.array([3.0], np.float32))

	def test_zeros_2x3(self, tmp_sptn):
		t = np.zeros((2, 3), np.float32)
		lido = tensor_read(tmp_sptn(t))
		assert lido.shape == (2, 3)
		assert lido.dtype == np.float32
		assert_array_equal(lido, t)

	def test_aleatorios_bit_exatos(self, tmp_sptn):
		rng = Rng(42)
		for i in range(1000):
			rank = int(rng.integers(1, 4))
			forma = tuple(int(v) for v in rng.integers(1, 6, size=rank))
			t = rng.normal(forma, 10.0)
			lido = tensor_read(tmp_sptn(t, f"t{i % 7}.sptn"))
			assert lido.tobytes() == t.tobytes()
			assert lido.shape == t.shape

	def _bytes_validos(self, tmp_sptn) -> bytes:
		with open(tmp_sptn(np.arange(6, dtype=np.float32).reshape(2, 3)), "rb") as f:
			return f.read()

	@pytest.mark.parametrize(
		"alterar, erro",
		[
			(lambda b: b"XPTN" + b[4:], BadMagicError),
			(lambda b: b[:4] + bytes([2]) + b[5:], BadVersionError),
			(lambda b: b[:5] + bytes([7]) + b[6:], BadDtypeError),
			(lambda b: b[:-1], TruncatedError),
			(lambda b: b[:20], TruncatedError),
			(lambda b: b[:3], TruncatedError),
			(lambda b: b[:7] + b"\x01" + b[8:], TensorFormatError),
			(lambda b: b + b"\x00\x00\x00\x00", TensorFormatError),
		],
	)
	def test_arquivos_invalidos(self, tmp_path, tmp_sptn, alterar, erro):
		caminho = tmp_path / "ruim.sptn"
		caminho.write_bytes(alterar(self._bytes_validos(tmp_sptn)))
		with pytest.raises(erro):
			tensor_read(str(caminho))

	@pytest.mark.parametrize(
		"rank, dims",
		[
			(2, (3, 0)),
			(0, ()),
			(2, (2**63, 2**63)),
			(3, (2**64 - 1, 2**64 - 1, 2)),
		],
	)
	def test_dimensoes_invalidas(self, tmp_path, rank, dims):
		caminho = tmp_path / "dims.sptn"
		cabecalho = b"SPTN" + bytes([1, 0, rank]) + b"\x00\x00\x00"
		caminho.write_bytes(cabecalho + b"".join(struct.pack("<Q", d) for d in dims) + bytes(16))
		with pytest.raises(TensorFormatError):
			tensor_read(str(caminho))

	def test_variantes_distintas(self):
		variantes = {BadMagicError, BadVersionError, BadDtypeError, TruncatedError}
		assert all(issubclass(v, TensorFormatError) for v in variantes)
		assert len({v.__name__ for v in variantes}) == 4

	def test_arquivo_inexistente(self, tmp_path):
		with pytest.raises(ArquivoError) as info:
			tensor_read(str(tmp_path / "nao_existe.sptn"))
		assert "nao_existe.sptn" in str(info.value)

	def test_escrita_em_pasta_inexistente(self, tmp_path):
		with pytest.raises(ArquivoError):
			tensor_write(np.ones(2, np.float32), str(tmp_path / "nao" / "existe" / "t.sptn"))


class TestAsTensor:
	def test_rejeita_nan(self):
		with pytest.raises(NonFiniteError):
			as_tensor([1.0, float("nan")])

	def test_rejeita_extensao_zero(self):
		with pytest.raises(ShapeError):
			as_tensor(np.zeros((0, 3)))

	def test_escalar_vira_rank_1(self):
		assert as_tensor(2.5).shape == (1,)


class TestRng:
	def test_mesma_semente_mesma_sequencia(self):
		a, b = Rng(7), Rng(7)
		assert_array_equal(a.normal((4, 5)), b.normal((4, 5)))
		assert_array_equal(a.permutation(10), b.permutation(10))

	def test_sementes_diferentes(self):
		assert not np.array_equal(Rng(1).normal((8,)), Rng(2).normal((8,)))

	def test_seed_fora_de_u64(self):
		with pytest.raises(ConfigError):
			Rng(-1)


class TestMatmul:
	def test_identidade(self, rng):
		a = rng.standard_normal((5, 4)).astype(np.float32)
		assert_array_equal(matmul(a, np.eye(4, dtype=np.float32)), a)

	def test_incompativel(self):
		with pytest.raises(ShapeError):
			matmul(np.ones((2, 3)), np.ones((4, 2)))

	def test_linhas_independentes(self, rng):
		a = rng.standard_normal((9, 6)).astype(np.float32)
		b = rng.standard_normal((6, 5)).astype(np.float32)
		completo = matmul(a, b)
		assert_array_equal(matmul(a[[2, 7]], b), completo[[2, 7]])

	def test_proximo_do_numpy(self, rng):
		a = rng.standard_normal((7, 11)).astype(np.float32)
		b = rng.standard_normal((11, 3)).astype(np.float32)
		assert_allclose(matmul(a, b), a.astype(np.float64) @ b, rtol=1e-5, atol=1e-5)

	def test_contador(self):
		with contar_operacoes() as contador:
			matmul(np.ones((3, 4)), np.ones((4, 5)))
			matmul(np.ones((2, 4)), np.ones((4, 5)))
		assert contador.chamadas == 2
		assert contador.macs == 3 * 4 * 5 + 2 * 4 * 5


class TestLayernorm:
	def test_media_zero_variancia_um(self, rng):
		x = rng.standard_normal((6, 32)).astype(np.float32) * 3 + 1
		y = layernorm(x, np.ones(32), np.zeros(32), eps=0.0)
		assert_allclose(y.mean(axis=1), 0.0, atol=1e-5)
		assert_allclose(y.var(axis=1), 1.0, atol=1e-4)

	def test_gamma_beta(self, rng):
		x = rng.standard_normal((4, 8)).astype(np.float32)
		base = layernorm(x, np.ones(8), np.zeros(8))
		assert_allclose(layernorm(x, np.full(8, 2.0), np.full(8, 0.5)), 2 * base + 0.5, rtol=1e-6, atol=1e-6)

	def test_eps_negativo(self):
		with pytest.raises(ConfigError):
			layernorm(np.ones((1, 2)), np.ones(2), np.zeros(2), eps=-1.0)

	def test_linha_constante(self):
		y = layernorm(np.full((2, 4), 3.0), np.ones(4), np.zeros(4))
		assert_array_equal(y, np.zeros((2, 4), np.float32))


class TestGelu:
	def test_valores_conhecidos(self):
		x = np.array([0.0, 1.0, -1.0, 3.0], np.float32)
		esperado = [0.5 * v * (1 + math.erf(v / math.sqrt(2))) for v in x.tolist()]
		assert_allclose(gelu(x), esperado, rtol=1e-6)

	@pytest.mark.parametrize("v", [10.0, 20.0, 100.0])
	def test_assintota_positiva(self, v):
		assert abs(float(gelu(np.array([v], np.float32))[0]) - v) <= 1e-6 * v

	def test_assintota_negativa(self):
		assert_allclose(gelu(np.array([-10.0, -50.0], np.float32)), 0.0, atol=1e-6)


class TestErroRelativo:
	def test_zero_para_iguais(self):
		assert max_rel_error(np.ones(3), np.ones(3)) == 0.0

	def test_escala_pelo_maximo(self):
		assert max_rel_error(np.array([1.0, 2.1]), np.array([1.0, 2.0])) == pytest.approx(0.05)
