#!/usr/bin/env python3
"""Render geodesic-atlas CSV outputs found in a directory to PNG files."""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


def read(path):
    return pd.read_csv(path, comment="#")


def grid_image(df, value, title, out):
    xs = np.sort(df["x"].unique())
    ys = np.sort(df["y"].unique())
    z = df.pivot(index="y", columns="x", values=value).loc[ys, xs].to_numpy()
    fig, ax = plt.subplots(figsize=(5, 4))
    mesh = ax.pcolormesh(xs, ys, z, shading="auto")
    fig.colorbar(mesh, ax=ax)
    ax.set_title(title)
    ax.set_aspect("equal")
    fig.savefig(out, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return ax


def plot_field(directory):
    df = read(directory / "field.csv")
    grid_image(df, "phi", "phi", directory / "field_phi.png")
    fig, ax = plt.subplots(figsize=(5, 4))
    step = max(1, int(np.sqrt(len(df))) // 24)
    sub = df.iloc[::step]
    ax.tricontour(df["x"], df["y"], df["phi"], levels=20)
    ax.quiver(sub["x"], sub["y"], sub["flowx"], sub["flowy"], angles="xy", width=0.002)
    ax.set_aspect("equal")
    ax.set_title("level sets and flow")
    fig.savefig(directory / "field_flow.png", dpi=120, bbox_inches="tight")
    plt.close(fig)


def plot_trace(directory):
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, style in (("trace_flow.csv", "-"), ("trace_geodesic.csv", "--")):
        path = directory / name
        if path.exists():
            df = read(path)
            ax.plot(df["q1"], df["q2"], style, label=name.removesuffix(".csv"))
    ax.legend()
    ax.set_aspect("equal")
    fig.savefig(directory / "trace.png", dpi=120, bbox_inches="tight")
    plt.close(fig)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("directory", type=Path)
    args = parser.parse_args()
    d = args.directory
    if (d / "field.csv").exists():
        plot_field(d)
    if (d / "kde_grid.csv").exists():
        grid_image(read(d / "kde_grid.csv"), "density", "KDE density", d / "kde_grid.png")
    if (d / "curvature_grid.csv").exists():
        grid_image(read(d / "curvature_grid.csv"), "ricci", "scalar curvature", d / "curvature_grid.png")
    if (d / "trace_flow.csv").exists():
        plot_trace(d)


if __name__ == "__main__":
    main()
