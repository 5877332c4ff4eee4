"""Write the bundled 100 x 20 example panel and its true groups."""

import csv
from pathlib import Path

from spectral_panel.dgp import DgpConfig, generate_dgp
from spectral_panel.panel import RngSpec, write_panel_csv

OUT = Path(__file__).resolve().parent.parent / "data"


def main():
    OUT.mkdir(exist_ok=True)
    cfg = DgpConfig(N=100, T=20, G=2, sigma2=4.0)
    panel, groups, _ = generate_dgp(cfg, RngSpec(2024))
    write_panel_csv(panel, OUT / "example_panel.csv")
    with open(OUT / "example_groups.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit_id", "group"])
        w.writerows(zip(panel.unit_ids, groups.labels.tolist()))


if __name__ == "__main__":
    main()
