"""Physical constants, beam and spin parameter types, and derived quantities.

Everything is SI internally. Conversions to the units used in reports
(microradians, angstroms, meV) live in the helpers at the bottom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import constants as sc

# Largest transverse-to-longitudinal momentum ratio accepted as paraxial.
PARAXIAL_LIMIT = 1e-2

ANGSTROM = 1e-10
MICRORAD = 1e-6
MEV = 1e-3 * sc.electron_volt


@dataclass(frozen=True)
class PhysConsts:
    """CODATA constants used throughout (SI)."""

    mu_B: float = sc.physical_constants["Bohr magneton"][0]
    hbar: float = sc.hbar
    m_e: float = sc.m_e
    c: float = sc.c
    e_charge: float = sc.e
    mu_0: float = sc.mu_0

    @property
    def r_e(self) -> float:
        """Coupling length e*mu0*mu_B/(2*pi*hbar); numerically the classical electron radius."""
        return self.e_charge * self.mu_0 * self.mu_B / (2.0 * math.pi * self.hbar)

    def scaled(self, factor: float) -> "PhysConsts":
        """Copy with the magnetic moment scaled, e.g. for a nuclear-spin mode."""
        return replace(self, mu_B=self.mu_B * factor)


@dataclass(frozen=True)
class BeamParams:
    """Incident Gaussian wavepacket: mean wavenumber, transverse and longitudinal spreads."""

    k_z0: float
    dk_perp: float
    dk_z: float
    z_p: float = 0.0

    def __post_init__(self) -> None:
        for name in ("k_z0", "dk_perp", "dk_z"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if self.dk_perp / self.k_z0 > PARAXIAL_LIMIT:
            raise ValueError(
                f"dk_perp/k_z0 = {self.dk_perp / self.k_z0:.3g} exceeds the paraxial limit {PARAXIAL_LIMIT}"
            )
        if self.dk_z / self.k_z0 > PARAXIAL_LIMIT:
            raise ValueError(
                f"dk_z/k_z0 = {self.dk_z / self.k_z0:.3g} exceeds the paraxial limit {PARAXIAL_LIMIT}"
            )
        if self.dk_perp >= 1e3 * self.dk_z:
            raise ValueError("dk_perp must stay below 1e3 * dk_z")

    @property
    def dr_perp(self) -> float:
        return 1.0 / (2.0 * self.dk_perp)

    @property
    def fwhm(self) -> float:
        return 2.0 * math.sqrt(2.0 * math.log(2.0)) * self.dr_perp

    def gamma0(self, consts: PhysConsts = PhysConsts()) -> float:
        p = consts.hbar * self.k_z0 / (consts.m_e * consts.c)
        return math.sqrt(1.0 + p * p)

    def energy0(self, consts: PhysConsts = PhysConsts()) -> float:
        """Total relativistic energy E0 = gamma0 m_e c^2."""
        return self.gamma0(consts) * consts.m_e * consts.c**2

    def velocity0(self, consts: PhysConsts = PhysConsts()) -> float:
        return consts.hbar * consts.c**2 * self.k_z0 / self.energy0(consts)

    def with_dk_perp(self, dk_perp: float) -> "BeamParams":
        return replace(self, dk_perp=dk_perp)


@dataclass(frozen=True)
class SpinParams:
    """Localized spin: smearing radius a0, Larmor frequency omega0, Bloch vector."""

    a0: float
    omega0: float
    bloch: tuple[float, float, float] = (0.0, 1.0, 0.0)

    def __post_init__(self) -> None:
        if not self.a0 > 0:
            raise ValueError("a0 must be positive")
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        norm = math.sqrt(sum(float(s) ** 2 for s in self.bloch))
        if norm > 1.0 + 1e-12:
            raise ValueError(f"Bloch vector norm {norm} exceeds 1")
        object.__setattr__(self, "bloch", tuple(float(s) for s in self.bloch))

    @property
    def k_a(self) -> float:
        return 1.0 / self.a0

    def delta_k(self, beam: BeamParams, consts: PhysConsts = PhysConsts()) -> float:
        """Momentum transfer set by the Zeeman energy, sqrt(gamma0 m_e omega0 / hbar)."""
        return math.sqrt(beam.gamma0(consts) * consts.m_e * self.omega0 / consts.hbar)


# Canonical 200 keV configuration.
K_Z0_200KEV = 2.51e12
DK_Z_200KEV = 1.06e7
A0_HYDROGEN = 5.29e-11
ZEEMAN_ENERGY_MEV = 0.208

PRESETS: dict[str, float] = {
    "200keV-broad": 1.06e7,
    "200keV-mid": 1.06e8,
    "200keV-narrow": 1.06e9,
}


def default_params_200keV(dk_perp: float = PRESETS["200keV-broad"]) -> tuple[PhysConsts, BeamParams, SpinParams]:
    consts = PhysConsts()
    beam = BeamParams(k_z0=K_Z0_200KEV, dk_perp=dk_perp, dk_z=DK_Z_200KEV)
    omega0 = ZEEMAN_ENERGY_MEV * MEV / consts.hbar
    spin = SpinParams(a0=A0_HYDROGEN, omega0=omega0)
    return consts, beam, spin


def preset(name: str) -> tuple[PhysConsts, BeamParams, SpinParams]:
    try:
        dk = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return default_params_200keV(dk)


def wavenumber_from_kinetic_energy(e_kin: float, consts: PhysConsts = PhysConsts()) -> float:
    """Relativistic electron wavenumber for kinetic energy e_kin in joules."""
    rest = consts.m_e * consts.c**2
    pc = math.sqrt(e_kin * e_kin + 2.0 * e_kin * rest)
    return pc / (consts.hbar * consts.c)


def fwhm_to_dk_perp(fwhm: float) -> float:
    return 2.0 * math.sqrt(2.0 * math.log(2.0)) / (2.0 * fwhm)


@dataclass(frozen=True)
class Validity:
    """Outcome of the longitudinal-overlap conditions, for run manifests."""

    transverse_ok: bool
    zeeman_ok: bool
    details: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.transverse_ok and self.zeeman_ok


def overlap_conditions(beam: BeamParams, spin: SpinParams, consts: PhysConsts = PhysConsts()) -> Validity:
    """Check dk_z against dk_perp^2/(4 k_z0) and delta_k^2/k_z0."""
    transverse = beam.dk_perp**2 / (4.0 * beam.k_z0)
    zeeman = spin.delta_k(beam, consts) ** 2 / beam.k_z0
    return Validity(
        transverse_ok=beam.dk_z > transverse,
        zeeman_ok=beam.dk_z > zeeman,
        details={"dk_z": beam.dk_z, "dk_perp_sq_over_4kz": transverse, "delta_k_sq_over_kz": zeeman},
    )
