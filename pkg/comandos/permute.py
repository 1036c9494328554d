import argparse

from utils.console import mostrar
from utils.data import salvar_pgm
from utils.grid import morton_order
from utils.logs import registrar_execucao
from utils.recursos import Comando, Listra
from utils.saliency import Granularity, OrderingConfig, SaliencyMap, importance_order
from utils.stripesort import StripeConfig, StripeVariant, block_map, stripe_sort
from utils.tensor import tensor_read, tensor_write


class PermuteComando(Comando):
	nome = "permute"
	ajuda = "Ordem de varredura σ (stripe sort) a partir de um mapa de saliência."

	def configurar(self, parser: argparse.ArgumentParser):
		parser.add_argument("--in", dest="entrada", required=True, help="mapa de saliência H×W em .sptn")
		parser.add_argument("--g", type=int, default=4, help="número de blocos G (padrão: 4)")
		parser.add_argument("--variant", choices=[v.value for v in StripeVariant], default=StripeVariant.FULL.value)
		parser.add_argument("--granularity", choices=[g.value for g in Granularity], default=Granularity.ZGROUP.value)
		parser.add_argument("--group-size", type=int, default=4, help="tamanho do z-grupo (padrão: 4)")
		parser.add_argument("--out", dest="saida", required=True, help="σ serializado como tensor [N] em .sptn")
		parser.add_argument("--blocks", default=None, help="imagem P5 com o bloco de σ de cada token")

	def executar(self, args: argparse.Namespace):
		mapa = SaliencyMap.from_tensor(tensor_read(args.entrada))
		cfg = StripeConfig(args.g, StripeVariant(args.variant))
		cfg.check(mapa.shape.n())

		pi = importance_order(mapa, OrderingConfig(Granularity(args.granularity), args.group_size))
		morton = morton_order(mapa.shape) if cfg.variant is StripeVariant.NO_SORT else None
		sigma = stripe_sort(pi, cfg, morton)
		tensor_write(sigma.to_tensor(), args.saida)

		if args.blocks:
			salvar_pgm(args.blocks, block_map(sigma, cfg.g, mapa.shape))

		mostrar(f"σ sobre N={sigma.n} tokens, G={cfg.g}, variante {cfg.variant.value}")
		registrar_execucao(self.nome, None, (args.saida, args.blocks))


def setup(app: Listra):
	app.add_comando(PermuteComando(app))
