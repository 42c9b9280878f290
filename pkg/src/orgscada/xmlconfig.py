"""XML configuration files.

Each organization is described by two documents: ``processes.xml`` listing the
PLCs (with their variable specifications) handled by the organization, and
``acquaintances.xml`` naming the peer organizations it may negotiate with.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Union

from .errors import ConfigInvalid
from .org import Acquaintance, AgentDefaults, OrganizationConfig
from .plantsim import PlcConfig, VariableSpec

__all__ = [
    "load_org_config",
    "parse_acquaintances",
    "parse_processes",
    "write_acquaintances",
    "write_processes",
]

PathLike = Union[str, Path]


def _parse_bool(raw: str) -> bool:
    return raw.strip().lower() in ("1", "true", "yes")


def _root(source: PathLike) -> ET.Element:
    try:
        return ET.parse(str(source)).getroot()
    except ET.ParseError as exc:
        raise ConfigInvalid(f"{source}: {exc}") from None
    except OSError as exc:
        raise ConfigInvalid(str(exc)) from None


def parse_processes(source: PathLike) -> OrganizationConfig:
    """Read processes.xml into a configuration with no acquaintances yet."""
    root = _root(source)
    if root.tag != "processes":
        raise ConfigInvalid(f"{source}: expected <processes> root, got <{root.tag}>")
    org_name = root.get("org", "")
    if not org_name:
        raise ConfigInvalid(f"{source}: <processes> needs an org attribute")
    cfg = OrganizationConfig(
        org_name=org_name,
        listen_address=root.get("listen", ""),
        seed=int(root.get("seed", "0")),
    )
    ca_count = root.get("ca-count")
    if ca_count is not None:
        cfg.ca_count = int(ca_count)
    defaults_el = root.find("defaults")
    if defaults_el is not None:
        cfg.defaults = AgentDefaults.from_doc(
            {k.replace("-", "_"): v for k, v in defaults_el.attrib.items()}
        )
    for plc_el in root.findall("plc"):
        name = plc_el.get("name", "")
        if not name:
            raise ConfigInvalid(f"{source}: <plc> needs a name attribute")
        variables = []
        for var_el in plc_el.findall("variable"):
            try:
                variables.append(
                    VariableSpec(
                        name=var_el.get("name", ""),
                        unit=var_el.get("unit", ""),
                        min=float(var_el.get("min", "0")),
                        max=float(var_el.get("max", "100")),
                        value=float(var_el.get("value", var_el.get("min", "0"))),
                        deadband=float(var_el.get("deadband", "0")),
                        writable=_parse_bool(var_el.get("writable", "false")),
                        step_fraction=float(var_el.get("step-fraction", "0.01")),
                    )
                )
            except ValueError as exc:
                raise ConfigInvalid(f"{source}: {exc}") from None
        cfg.plcs.append(PlcConfig(plc_name=name, variables=variables))
    cfg.validate()
    return cfg


def parse_acquaintances(source: PathLike) -> list[Acquaintance]:
    root = _root(source)
    if root.tag != "acquaintances":
        raise ConfigInvalid(f"{source}: expected <acquaintances> root, got <{root.tag}>")
    out = []
    for el in root.findall("acquaintance"):
        org = el.get("org", "")
        if not org:
            raise ConfigInvalid(f"{source}: <acquaintance> needs an org attribute")
        out.append(Acquaintance(org_name=org, address=el.get("address", "")))
    return out


def load_org_config(processes: PathLike, acquaintances: PathLike) -> OrganizationConfig:
    cfg = parse_processes(processes)
    cfg.acquaintances = parse_acquaintances(acquaintances)
    cfg.validate()
    return cfg


def write_processes(cfg: OrganizationConfig, dest: PathLike) -> None:
    root = ET.Element("processes", {"org": cfg.org_name, "seed": str(cfg.seed)})
    if cfg.listen_address:
        root.set("listen", cfg.listen_address)
    if cfg.ca_count is not None:
        root.set("ca-count", str(cfg.ca_count))
    ET.SubElement(
        root,
        "defaults",
        {k.replace("_", "-"): str(v) for k, v in cfg.defaults.to_doc().items()},
    )
    for plc in cfg.plcs:
        plc_el = ET.SubElement(root, "plc", {"name": plc.plc_name})
        for v in plc.variables:
            ET.SubElement(
                plc_el,
                "variable",
                {
                    "name": v.name,
                    "unit": v.unit,
                    "min": str(v.min),
                    "max": str(v.max),
                    "value": str(v.value),
                    "deadband": str(v.deadband),
                    "writable": "true" if v.writable else "false",
                    "step-fraction": str(v.step_fraction),
                },
            )
    tree = ET.ElementTree(root)
    ET.indent(tree)
    tree.write(str(dest), encoding="unicode", xml_declaration=True)


def write_acquaintances(acquaintances: list[Acquaintance], dest: PathLike) -> None:
    root = ET.Element("acquaintances")
    for a in acquaintances:
        ET.SubElement(root, "acquaintance", {"org": a.org_name, "address": a.address})
    tree = ET.ElementTree(root)
    ET.indent(tree)
    tree.write(str(dest), encoding="unicode", xml_declaration=True)
