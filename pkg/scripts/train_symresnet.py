"""Train the 7-block Perona-Malik SymResNet in shared and time-dynamic form at desk scale."""
import argparse
import logging
from pathlib import Path

from diffnets import Arch, FluxKind, NetworkSpec, Sharing
from diffnets.networks import save_model
from diffnets.training import (
    DatasetConfig,
    TrainConfig,
    generate_dataset,
    predict,
    psnr,
    train,
    write_metric_log,
)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n-train", type=int, default=2000)
    p.add_argument("--blocks", type=int, default=7)
    p.add_argument("--epochs-shared", type=int, default=200)
    p.add_argument("--epochs-dynamic", type=int, default=150)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default="runs/symresnet")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    data = generate_dataset(DatasetConfig(n_train=args.n_train, seed=args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for sharing, epochs in ((Sharing.SHARED, args.epochs_shared), (Sharing.TIME_DYNAMIC, args.epochs_dynamic)):
        spec = NetworkSpec(Arch.SYMRESNET, args.blocks, 1, sharing, FluxKind.PERONA_MALIK)
        res = train(spec, data, TrainConfig(max_epochs=epochs, restarts=args.restarts, beta=10.0))
        test = psnr(predict(spec, res.params, data.test), data.test_clean)
        save_model(out / f"{sharing.value}.txt", spec, res.params)
        write_metric_log(out / f"{sharing.value}_metrics.csv", res.log)
        print(f"{sharing.value}: val {res.val_psnr:.2f} dB, test {test:.2f} dB")


if __name__ == "__main__":
    main()
