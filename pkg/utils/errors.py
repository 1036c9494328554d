import logging
import sys
import traceback

from enum import IntEnum
from typing import Callable, Optional

logger = logging.getLogger(__name__)


class CodigoSaida(IntEnum):
	SUCESSO = 0
	INESPERADO = 1
	USO = 2
	ARQUIVO = 3
	CONFIG = 4
	FORMATO = 5
	NUMERICO = 6


class ListraError(Exception):
	codigo = CodigoSaida.INESPERADO


class ShapeError(ListraError, ValueError):
	codigo = CodigoSaida.NUMERICO


class NonFiniteError(ListraError, ValueError):
	codigo = CodigoSaida.NUMERICO


class UndefinedCorrelationError(ListraError, ValueError):
	codigo = CodigoSaida.NUMERICO


class PermutationError(ListraError, ValueError):
	codigo = CodigoSaida.NUMERICO


class ConfigError(ListraError, ValueError):
	codigo = CodigoSaida.CONFIG


class DivisibilityError(ConfigError):
	def __init__(self, n: int, divisor: int, nome: str):
		self.n = n
		self.divisor = divisor
		self.nome = nome
		super().__init__(f"N={n} não é divisível por {nome}={divisor}")


class ArquivoError(ListraError, OSError):
	codigo = CodigoSaida.ARQUIVO

	def __init__(self, caminho: str, motivo: str):
		self.caminho = caminho
		self.motivo = motivo
		super().__init__(f"{caminho}: {motivo}")


class TensorFormatError(ListraError):
	codigo = CodigoSaida.FORMATO

	def __init__(self, caminho: str, motivo: str):
		self.caminho = caminho
		super().__init__(f"{caminho}: {motivo}")


class BadMagicError(TensorFormatError):
	pass


class BadVersionError(TensorFormatError):
	pass


class BadDtypeError(TensorFormatError):
	pass


class TruncatedError(TensorFormatError):
	pass


class ErrorManager:
	def __init__(self, comando: str = "listra"):
		self.comando = comando
		self._setup_hooks()

	def _setup_hooks(self):
		sys.excepthook = self._handle_global_exception

	def handle_error(
		self,
		*,
		origin: str,
		error: BaseException,
		send_user_feedback: Optional[Callable[[str], None]] = None,
	) -> CodigoSaida:
		logger.debug(
			"erro capturado em %s:\n%s",
			origin,
			"".join(traceback.format_exception(type(error), error, error.__traceback__)),
		)

		feedback = send_user_feedback or self._stderr
		try:
			feedback(self._build_user_message(origin, error))
		except Exception:
			traceback.print_exc()

		return self.exit_code(error)

	def exit_code(self, error: BaseException) -> CodigoSaida:
		if isinstance(error, ListraError):
			return error.codigo

		if isinstance(error, FileNotFoundError | PermissionError | IsADirectoryError):
			return CodigoSaida.ARQUIVO

		return CodigoSaida.INESPERADO

	def _build_user_message(self, origin: str, error: BaseException) -> str:
		if isinstance(error, DivisibilityError):
			return f"[{origin}] divisibilidade violada: {error}"

		if isinstance(error, ConfigError):
			return f"[{origin}] configuração inválida: {error}"

		if isinstance(error, TensorFormatError):
			return f"[{origin}] arquivo de tensor inválido ({type(error).__name__}): {error}"

		if isinstance(error, ArquivoError):
			return f"[{origin}] falha de arquivo: {error}"

		if isinstance(error, FileNotFoundError):
			return f"[{origin}] arquivo não encontrado: {error.filename}"

		if isinstance(error, ListraError):
			return f"[{origin}] {type(error).__name__}: {error}"

		return f"[{origin}] ocorreu um erro inesperado: {error!r}"

	def _stderr(self, msg: str):
		print(msg, file=sys.stderr)

	def _handle_global_exception(self, exc_type, exc_value, exc_traceback):
		traceback.print_exception(exc_type, exc_value, exc_traceback)
		self.handle_error(origin=self.comando, error=exc_value, send_user_feedback=lambda msg: None)

	def wrap(self, func: Callable[..., int | None], origin: str | None = None) -> Callable[..., int]:
		def wrapper(*args, **kwargs) -> int:
			try:
				resultado = func(*args, **kwargs)
				return int(resultado or CodigoSaida.SUCESSO)
			except Exception as e:
				return int(self.handle_error(origin=origin or func.__name__, error=e))

		return wrapper


def setup_error_manager(comando: str = "listra") -> ErrorManager:
	return ErrorManager(comando)
