import argparse
import dataclasses

from utils.console import mostrar, mostrar_seed, mostrar_tabela
from utils.data import BENCH_COLUNAS, CUSTO_COLUNAS, DataFiles, abrir_config, salvar_csv
from utils.encoder import EncoderConfig, Modo, bench, encoder_forward, init_weights
from utils.errors import ConfigError
from utils.logs import registrar_execucao
from utils.recursos import Comando, Listra, lista_floats
from utils.tensor import tensor_read, tensor_write


def carregar_config(args: argparse.Namespace) -> EncoderConfig:
	cfg = EncoderConfig.from_dict(abrir_config(args.config))
	if args.seed is not None:
		cfg = dataclasses.replace(cfg, seed=args.seed)
	return cfg


class EncodeComando(Comando):
	nome = "encode"
	ajuda = "Roda o encoder (denso ou esparso) e grava a saída e o relatório de custo."

	def configurar(self, parser: argparse.ArgumentParser):
		parser.add_argument("--config", default=DataFiles.CONFIG.caminho, help="arquivo chave=valor do encoder")
		parser.add_argument("--in", dest="entrada", default=None, help="tensor H×W×D em .sptn")
		parser.add_argument("--mode", choices=[m.value for m in Modo], default=Modo.SPARSE.value)
		parser.add_argument("--out", dest="saida", default=None, help="saída H×W×D em .sptn")
		parser.add_argument("--report", default=None, help="relatório de custo por bloco em CSV")
		parser.add_argument("--bench", type=lista_floats, default=None, help="densidades para medir o encoder")
		parser.add_argument("--repeats", type=int, default=3, help="repetições por densidade no bench")
		parser.add_argument("--csv", default=None, help="tabela do bench em CSV")
		self.adicionar_seed(parser)

	def executar(self, args: argparse.Namespace):
		cfg = carregar_config(args)
		mostrar_seed(cfg.seed)

		if args.bench:
			x = tensor_read(args.entrada) if args.entrada else None
			linhas = bench(cfg, args.bench, args.repeats, x)
			mostrar_tabela(BENCH_COLUNAS, linhas)
			if args.csv:
				salvar_csv(args.csv, BENCH_COLUNAS, linhas)
			registrar_execucao(self.nome, cfg.seed, (args.csv,))
			return

		if not args.entrada or not args.saida:
			raise ConfigError("encode precisa de --in e --out (ou de --bench)")

		y, relatorio = encoder_forward(tensor_read(args.entrada), init_weights(cfg), cfg, Modo(args.mode))
		tensor_write(y, args.saida)

		linhas = relatorio.rows()
		mostrar_tabela(CUSTO_COLUNAS, linhas)
		if args.report:
			salvar_csv(args.report, CUSTO_COLUNAS, linhas)

		mostrar(f"densidade de atenção {relatorio.attention_density():.6g}, {relatorio.wall_ms():.1f} ms")
		registrar_execucao(self.nome, cfg.seed, (args.saida, args.report))


def setup(app: Listra):
	app.add_comando(EncodeComando(app))
