import argparse

from utils.attention import TILE_GLOBAL, attention_bench
from utils.console import mostrar_seed, mostrar_tabela
from utils.data import BENCH_COLUNAS, salvar_csv
from utils.logs import registrar_execucao
from utils.recursos import Comando, Listra, lista_floats


class AttnBenchComando(Comando):
	nome = "attn-bench"
	ajuda = "Mede o kernel A-shape numa atenção global N×d para várias densidades."

	def configurar(self, parser: argparse.ArgumentParser):
		parser.add_argument("--n", type=int, default=4096, help="tokens, quadrado perfeito (padrão: 4096)")
		parser.add_argument("--d", type=int, default=64, help="dimensão da cabeça (padrão: 64)")
		parser.add_argument("--densities", type=lista_floats, default=[0.25, 0.5, 1.0])
		parser.add_argument("--repeats", type=int, default=20)
		parser.add_argument("--tile", type=int, default=TILE_GLOBAL)
		parser.add_argument("--csv", default=None, help="tabela density,achieved_density,median_ms,speedup")
		self.adicionar_seed(parser)

	def executar(self, args: argparse.Namespace):
		seed = self.resolver_seed(args)
		mostrar_seed(seed)

		linhas = attention_bench(args.n, args.d, args.densities, args.repeats, args.tile, seed)
		mostrar_tabela(BENCH_COLUNAS, linhas)

		if args.csv:
			salvar_csv(args.csv, BENCH_COLUNAS, linhas)
		registrar_execucao(self.nome, seed, (args.csv,))


def setup(app: Listra):
	app.add_comando(AttnBenchComando(app))
