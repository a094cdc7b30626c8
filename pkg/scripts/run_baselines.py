"""Grid-searched classical diffusion baselines on the synthetic 1D benchmark."""
import argparse

from diffnets import FluxKind
from diffnets.training import DatasetConfig, classical_baselines, generate_dataset


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--max-time", type=float, default=100.0)
    args = p.parse_args()
    data = generate_dataset(DatasetConfig(n_train=0, seed=args.seed))
    print("flux,lambda,tau,steps,val_psnr,test_psnr")
    for kind in (FluxKind.LINEAR, FluxKind.CHARBONNIER, FluxKind.PERONA_MALIK):
        r = classical_baselines(data, kind, max_time=args.max_time)
        print(f"{kind.value},{r.lam},{r.tau:.6f},{r.steps},{r.val_psnr:.3f},{r.test_psnr:.3f}")


if __name__ == "__main__":
    main()
