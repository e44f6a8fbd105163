"""Beer-Lambert synthetic dataset generator.

Mixtures of absorbing species with Gaussian absorption bands give labeled
datasets with known ground truth: absorbance is linear in concentrations
(A = sum_i eps_i(lambda) * c_i * L) and every target is a fixed linear
combination of the same concentrations, so a least-squares oracle can verify
everything a learned model claims.

Species profiles attribute chemistry to the six report targets: TOC comes
from per-species carbon content, conductivity from per-species molar
conductivity, and the ion targets (calcium, sodium, magnesium, chlorides)
from explicit mass coefficients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .spectra import (
    CANONICAL_TARGETS,
    DEFAULT_GRID,
    Dataset,
    Sample,
    Spectrum,
    WavelengthGrid,
)

#: mmol/L -> mol/L, the unit Beer-Lambert epsilon expects.
_MMOL_TO_MOL = 1e-3


@dataclass(frozen=True)
class GaussianPeak:
    """One absorption band: eps(lambda) = epsilon_max * exp(-(lambda-center)^2 / (2 width^2))."""

    center_nm: float
    width_nm: float
    epsilon_max: float  # L mol^-1 cm^-1

    def __post_init__(self):
        if not self.width_nm > 0:
            raise ValueError(f"width_nm must be positive, got {self.width_nm}")
        if self.epsilon_max < 0:
            raise ValueError(f"epsilon_max must be >= 0, got {self.epsilon_max}")


@dataclass(frozen=True)
class SpeciesProfile:
    """An absorbing species and its contributions to the report targets."""

    name: str
    peaks: tuple[GaussianPeak, ...] = ()
    carbon_factor: float = 0.0  # mg C per mmol, feeds TOC
    molar_conductivity: float = 0.0  # uS/cm per mmol/L, feeds conductivity
    target_links: Mapping[str, float] = field(default_factory=dict)  # mg per mmol

    def __post_init__(self):
        object.__setattr__(self, "peaks", tuple(self.peaks))
        object.__setattr__(self, "target_links", dict(self.target_links))
        if self.carbon_factor < 0:
            raise ValueError("carbon_factor must be >= 0")
        if self.molar_conductivity < 0:
            raise ValueError("molar_conductivity must be >= 0")
        reserved = {"TOC", "conductivity"}
        linked = set(self.target_links) - (set(CANONICAL_TARGETS) - reserved)
        if linked:
            raise ValueError(
                f"species '{self.name}' links unknown or reserved targets: "
                f"{sorted(linked)} (TOC and conductivity come from carbon_factor "
                "and molar_conductivity)"
            )


@dataclass(frozen=True)
class SynthConfig:
    grid: WavelengthGrid
    species: tuple[SpeciesProfile, ...]
    concentration_ranges: Mapping[str, tuple[float, float]]  # mmol/L
    path_length_cm: float = 10.0  # 100 mm cuvette
    noise_sigma_au: float = 0.001
    n_samples: int = 500
    seed: int = 1

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(
            self,
            "concentration_ranges",
            {k: (float(v[0]), float(v[1])) for k, v in self.concentration_ranges.items()},
        )
        if not self.path_length_cm > 0:
            raise ValueError("path_length_cm must be positive")
        if self.noise_sigma_au < 0:
            raise ValueError("noise_sigma_au must be >= 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be an unsigned integer")
        names = [s.name for s in self.species]
        if len(set(names)) != len(names):
            raise ValueError("species names must be unique")
        for name in names:
            if name not in self.concentration_ranges:
                raise ValueError(f"no concentration range for species '{name}'")
            low, high = self.concentration_ranges[name]
            if low < 0 or low > high:
                raise ValueError(
                    f"bad concentration range for '{name}': ({low}, {high})"
                )


def epsilon_curve(profile: SpeciesProfile, grid: WavelengthGrid) -> np.ndarray:
    """Molar absorptivity sampled at every grid wavelength (all entries >= 0)."""
    wl = grid.wavelengths()
    eps = np.zeros_like(wl)
    for peak in profile.peaks:
        eps += peak.epsilon_max * np.exp(
            -((wl - peak.center_nm) ** 2) / (2.0 * peak.width_nm**2)
        )
    return eps


def absorbance(
    concentrations_mmol_l: Sequence[float],
    profiles: Sequence[SpeciesProfile],
    grid: WavelengthGrid,
    path_length_cm: float,
) -> Spectrum:
    """Noiseless Beer-Lambert mixture absorbance, one concentration per profile."""
    c = np.asarray(concentrations_mmol_l, dtype=np.float64)
    if c.shape != (len(profiles),):
        raise ValueError(
            f"got {c.shape[0] if c.ndim == 1 else 'non-vector'} concentrations "
            f"for {len(profiles)} species"
        )
    if np.any(c < 0):
        raise ValueError("concentrations must be >= 0")
    total = np.zeros(grid.n_channels)
    for conc, profile in zip(c, profiles):
        total += epsilon_curve(profile, grid) * (conc * _MMOL_TO_MOL) * path_length_cm
    return Spectrum(grid=grid, absorbance=total)


def _target_matrix(config: SynthConfig) -> np.ndarray:
    """Coefficients T [n_species x n_targets] so targets = concentrations @ T."""
    T = np.zeros((len(config.species), len(CANONICAL_TARGETS)))
    for i, species in enumerate(config.species):
        for j, name in enumerate(CANONICAL_TARGETS):
            if name == "TOC":
                T[i, j] = species.carbon_factor
            elif name == "conductivity":
                T[i, j] = species.molar_conductivity
            else:
                T[i, j] = species.target_links.get(name, 0.0)
    return T


def derive_targets(
    concentrations_mmol_l: Sequence[float], config: SynthConfig
) -> np.ndarray:
    """Six targets in canonical order for one concentration vector."""
    c = np.asarray(concentrations_mmol_l, dtype=np.float64)
    if c.shape != (len(config.species),):
        raise ValueError(
            f"expected {len(config.species)} concentrations, got shape {c.shape}"
        )
    if np.any(c < 0):
        raise ValueError("concentrations must be >= 0")
    # einsum keeps the accumulation order batch-size independent, so this
    # matches generate_dataset bitwise.
    return np.einsum("s,st->t", c, _target_matrix(config))


def generate_dataset(config: SynthConfig) -> Dataset:
    """Draw a labeled dataset; fully determined by ``config.seed``.

    Concentrations are uniform in their ranges, spectra get i.i.d. Gaussian
    channel noise with sigma ``noise_sigma_au``, targets stay noiseless.
    """
    rng = np.random.default_rng(config.seed)
    names = [s.name for s in config.species]
    lows = np.array([config.concentration_ranges[n][0] for n in names])
    highs = np.array([config.concentration_ranges[n][1] for n in names])
    C = rng.uniform(lows, highs, size=(config.n_samples, len(names)))

    E = np.stack([epsilon_curve(s, config.grid) for s in config.species])
    # Accumulate species in the same order as absorbance() so a noiseless
    # dataset reproduces its spectra bitwise.
    clean = np.zeros((config.n_samples, config.grid.n_channels))
    for s in range(len(names)):
        clean += E[s][None, :] * (C[:, s : s + 1] * _MMOL_TO_MOL) * config.path_length_cm
    noise = rng.normal(0.0, config.noise_sigma_au, size=clean.shape)
    A = clean + noise
    Y = np.einsum("ns,st->nt", C, _target_matrix(config))

    width = max(4, len(str(config.n_samples)))
    samples = tuple(
        Sample(
            id=f"s{i + 1:0{width}d}",
            spectrum=Spectrum(config.grid, A[i]),
            targets=Y[i],
        )
        for i in range(config.n_samples)
    )
    return Dataset(grid=config.grid, target_names=CANONICAL_TARGETS, samples=samples)


def default_config(
    n_samples: int = 500, noise_sigma_au: float = 0.001, seed: int = 1
) -> SynthConfig:
    """Six-target default mixture.

    The two organic species carry all the TOC and absorb only between 210 and
    270 nm, so wavelength attributions for TOC are localized by construction.
    The salt-linked species use weaker, broader bands at longer wavelengths.
    """
    species = (
        SpeciesProfile(
            name="humic",
            peaks=(GaussianPeak(218.0, 10.0, 750.0), GaussianPeak(254.0, 22.0, 420.0)),
            carbon_factor=150.0,
        ),
        SpeciesProfile(
            name="fulvic",
            peaks=(GaussianPeak(232.0, 14.0, 350.0), GaussianPeak(265.0, 12.0, 180.0)),
            carbon_factor=90.0,
        ),
        SpeciesProfile(
            name="sodium_nitrate",
            peaks=(GaussianPeak(310.0, 16.0, 60.0),),
            molar_conductivity=121.5,
            target_links={"sodium": 22.99},
        ),
        SpeciesProfile(
            name="sodium_chloride",
            peaks=(GaussianPeak(400.0, 45.0, 40.0),),
            molar_conductivity=126.4,
            target_links={"sodium": 22.99, "chlorides": 35.45},
        ),
        SpeciesProfile(
            name="calcium_carbonate",
            peaks=(GaussianPeak(450.0, 55.0, 35.0),),
            molar_conductivity=238.0,
            target_links={"calcium": 40.08},
        ),
        SpeciesProfile(
            name="magnesium_sulfate",
            peaks=(GaussianPeak(530.0, 65.0, 30.0),),
            molar_conductivity=265.0,
            target_links={"magnesium": 24.31},
        ),
    )
    ranges = {
        "humic": (0.05, 0.45),
        "fulvic": (0.05, 0.5),
        "sodium_nitrate": (0.1, 0.8),
        "sodium_chloride": (0.4, 2.2),
        "calcium_carbonate": (0.5, 2.5),
        "magnesium_sulfate": (0.2, 1.2),
    }
    return SynthConfig(
        grid=DEFAULT_GRID,
        species=species,
        concentration_ranges=ranges,
        path_length_cm=10.0,
        noise_sigma_au=noise_sigma_au,
        n_samples=n_samples,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# JSON round trip (field names match the dataclasses)


def config_to_dict(config: SynthConfig) -> dict:
    return {
        "grid": {
            "start_nm": config.grid.start_nm,
            "step_nm": config.grid.step_nm,
            "n_channels": config.grid.n_channels,
        },
        "species": [
            {
                "name": s.name,
                "peaks": [
                    {
                        "center_nm": p.center_nm,
                        "width_nm": p.width_nm,
                        "epsilon_max": p.epsilon_max,
                    }
                    for p in s.peaks
                ],
                "carbon_factor": s.carbon_factor,
                "molar_conductivity": s.molar_conductivity,
                "target_links": dict(s.target_links),
            }
            for s in config.species
        ],
        "concentration_ranges": {
            k: list(v) for k, v in config.concentration_ranges.items()
        },
        "path_length_cm": config.path_length_cm,
        "noise_sigma_au": config.noise_sigma_au,
        "n_samples": config.n_samples,
        "seed": config.seed,
    }


def config_from_dict(doc: Mapping) -> SynthConfig:
    try:
        grid = WavelengthGrid(
            start_nm=float(doc["grid"]["start_nm"]),
            step_nm=float(doc["grid"]["step_nm"]),
            n_channels=int(doc["grid"]["n_channels"]),
        )
        species = tuple(
            SpeciesProfile(
                name=s["name"],
                peaks=tuple(
                    GaussianPeak(
                        center_nm=float(p["center_nm"]),
                        width_nm=float(p["width_nm"]),
                        epsilon_max=float(p["epsilon_max"]),
                    )
                    for p in s.get("peaks", [])
                ),
                carbon_factor=float(s.get("carbon_factor", 0.0)),
                molar_conductivity=float(s.get("molar_conductivity", 0.0)),
                target_links={
                    k: float(v) for k, v in s.get("target_links", {}).items()
                },
            )
            for s in doc["species"]
        )
        return SynthConfig(
            grid=grid,
            species=species,
            concentration_ranges={
                k: (float(v[0]), float(v[1]))
                for k, v in doc["concentration_ranges"].items()
            },
            path_length_cm=float(doc.get("path_length_cm", 10.0)),
            noise_sigma_au=float(doc.get("noise_sigma_au", 0.001)),
            n_samples=int(doc.get("n_samples", 500)),
            seed=int(doc.get("seed", 1)),
        )
    except KeyError as exc:
        raise ValueError(f"synth config is missing field {exc}") from None


def load_config(path) -> SynthConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"synth config is not valid JSON: {exc}") from None
    return config_from_dict(doc)
