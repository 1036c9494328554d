"""
Funções e classes auxiliares para:
  - Definir a classe base dos comandos;
  - Ler os padrões do ambiente (seed, nível de log);
  - Gerenciar a classe da aplicação de linha de comando.
"""
import argparse
import importlib
import logging
import os
import sys

from typing import Sequence

from .errors import CodigoSaida, ConfigError, ErrorManager, setup_error_manager
from .logs import configurar_logs

logger = logging.getLogger(__name__)

PASTA_COMANDOS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "comandos")


def seed_padrao() -> int:
	valor = os.getenv("LISTRA_SEED", "0")
	try:
		seed = int(valor)
	except ValueError:
		raise ConfigError(f"LISTRA_SEED inválido: {valor!r}") from None

	if not 0 <= seed < 2**64:
		raise ConfigError(f"LISTRA_SEED fora de u64: {seed}")
	return seed


def lista_floats(texto: str) -> list[float]:
	try:
		return [float(v) for v in texto.split(",") if v.strip()]
	except ValueError:
		raise argparse.ArgumentTypeError(f"lista de números inválida: {texto!r}") from None


def lista_inteiros(texto: str) -> list[int]:
	try:
		return [int(v) for v in texto.split(",") if v.strip()]
	except ValueError:
		raise argparse.ArgumentTypeError(f"lista de inteiros inválida: {texto!r}") from None


class Comando:
	"""Um subcomando: registra os próprios argumentos e executa."""
	nome: str = ""
	ajuda: str = ""

	def __init__(self, app: "Listra"):
		self.app = app

	def configurar(self, parser: argparse.ArgumentParser):
		pass

	def executar(self, args: argparse.Namespace) -> int | None:
		raise NotImplementedError

	def adicionar_seed(self, parser: argparse.ArgumentParser):
		parser.add_argument("--seed", type=int, default=None, help="semente (padrão: LISTRA_SEED ou 0)")

	def resolver_seed(self, args: argparse.Namespace) -> int:
		seed = args.seed if args.seed is not None else seed_padrao()
		if not 0 <= seed < 2**64:
			raise ConfigError(f"seed fora de u64: {seed}")
		return seed


class Listra:
	def __init__(self, prog: str = "listra"):
		self.parser = argparse.ArgumentParser(
			prog=prog,
			description="Atenção por listras e MLP roteado para encoders ViT.",
			allow_abbrev=False,
		)
		self.parser.add_argument("--log-level", default=None, help="nível de log (padrão: LISTRA_LOG_LEVEL ou WARNING)")
		self.subparsers = self.parser.add_subparsers(dest="comando", metavar="COMANDO", required=True)
		self.comandos: dict[str, Comando] = {}
		self.errors: ErrorManager = setup_error_manager(prog)

	def add_comando(self, comando: Comando):
		parser = self.subparsers.add_parser(comando.nome, help=comando.ajuda, allow_abbrev=False)
		comando.configurar(parser)
		parser.set_defaults(_comando=comando)
		self.comandos[comando.nome] = comando

	def load_comandos(self, pasta: str = PASTA_COMANDOS):
		for extension in sorted(os.listdir(pasta)):
			if extension.endswith(".py") and not extension.startswith("_"):
				modulo = importlib.import_module(f"comandos.{extension[:-3]}")
				modulo.setup(self)

	def run(self, argv: Sequence[str] | None = None) -> int:
		if not self.comandos:
			self.load_comandos()

		try:
			args = self.parser.parse_args(argv)
		except SystemExit as e:
			# argparse já escreveu a mensagem de uso
			return int(e.code) if isinstance(e.code, int) else int(CodigoSaida.USO)

		configurar_logs(args.log_level or os.getenv("LISTRA_LOG_LEVEL", "WARNING"))

		comando: Comando = args._comando
		logger.debug("executando %s com %s", comando.nome, vars(args))
		return self.errors.wrap(comando.executar, origin=comando.nome)(args)


def main(argv: Sequence[str] | None = None) -> int:
	return Listra().run(sys.argv[1:] if argv is None else argv)
