def help():
    help = ["commands:",
            "  gen-data       : Write a synthetic clothed-body dataset (sample_<id>/ directories)",
            "  train          : Train a model; checkpoint, manifest and train_log.csv land in --out",
            "  reconstruct    : Reconstruct a coloured mesh from one sample directory",
            "  evaluate       : Chamfer, P2S, six-view normals and PSNR of --pred against --gt",
            "  ablate         : Train and evaluate each ablation mode on one shared split",
            "  animate        : Re-pose a subject with --theta-new, e.g. \"l_shoulder.z=90deg\"",
            "  tryon          : Swap body-part features from --source onto --target",
            "  inspect-planes : Write per-channel grids of the xy/yz/xz feature planes",
            "",
            "exit codes: 0 ok, 2 configuration or input error, 3 numeric error, 4 I/O error",
    ]
    return "\n".join(help)

if __name__ == "__main__":
    print(help())
