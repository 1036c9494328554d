import argparse

from utils.console import mostrar, mostrar_seed, mostrar_tabela
from utils.errors import CodigoSaida
from utils.logs import registrar_execucao
from utils.recursos import Comando, Listra
from utils.verificacao import executar_suites


class VerifyComando(Comando):
	nome = "verify"
	ajuda = "Roda as suítes de equivalência contra os oráculos densos."

	def configurar(self, parser: argparse.ArgumentParser):
		self.adicionar_seed(parser)
		parser.add_argument("--cases", type=int, default=50, help="instâncias aleatórias do kernel (padrão: 50)")

	def executar(self, args: argparse.Namespace) -> int:
		seed = self.resolver_seed(args)
		mostrar_seed(seed)

		resultados = executar_suites(seed, max(1, args.cases))
		mostrar_tabela(
			["suite", "status", "detalhe"],
			[{"suite": r.nome, "status": "ok" if r.passou else "FALHOU", "detalhe": r.detalhe} for r in resultados],
		)
		registrar_execucao(self.nome, seed)

		falhas = [r for r in resultados if not r.passou]
		if falhas:
			mostrar(f"{len(falhas)} suíte(s) falharam")
			return CodigoSaida.INESPERADO

		mostrar("todas as suítes passaram")
		return CodigoSaida.SUCESSO


def setup(app: Listra):
	app.add_comando(VerifyComando(app))
