"""Hours-long run: 16-channel, 20-block time-dynamic SymResNets with three activations."""
import argparse
import logging
import os

from diffnets import Arch, FluxKind, NetworkSpec, Sharing
from diffnets.training import (
    DatasetConfig,
    TrainConfig,
    generate_dataset,
    predict,
    psnr,
    train,
)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--blocks", type=int, default=20)
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--threads", type=int, default=os.cpu_count())
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    data = generate_dataset(DatasetConfig(seed=args.seed))
    for kind in (FluxKind.PERONA_MALIK, FluxKind.CHARBONNIER, FluxKind.RELU):
        spec = NetworkSpec(Arch.SYMRESNET, args.blocks, args.channels, Sharing.TIME_DYNAMIC, kind)
        cfg = TrainConfig(max_epochs=args.epochs, restarts=args.restarts, beta=10.0, threads=args.threads)
        res = train(spec, data, cfg)
        print(f"{kind.value}: test {psnr(predict(spec, res.params, data.test), data.test_clean):.2f} dB")


if __name__ == "__main__":
    main()
