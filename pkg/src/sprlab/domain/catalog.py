# src/sprlab/domain/catalog.py
"""
Grupos de escritorio: factores cíclicos hiperbólicos o parabólicos
colocados por dirección visual en o, y sus productos de Schottky.
"""
from __future__ import annotations
from typing import Callable, Dict

from sprlab.core.config import GroupSection
from sprlab.core.errors import ConfigError, GeometryError
from sprlab.domain.group import GroupPresentation, make_group, schottky_product
from sprlab.domain.hyperbolic import (
    BASEPOINT, HALF_PI, HPoint, MobiusMap, dilation, point_frame, rotation_at_i,
    translation,
)


def _aimed(direction: float, o: HPoint) -> MobiusMap:
    return point_frame(o) @ rotation_at_i(direction - HALF_PI)


def hyperbolic_through(direction: float, length: float, o: HPoint = BASEPOINT) -> MobiusMap:
    """Traslación de longitud `length` sobre el eje por o; atrae hacia `direction`."""
    if length <= 0.0:
        raise GeometryError("longitud de traslación no positiva", length=length)
    f = _aimed(direction, o)
    return f @ dilation(length) @ f.inverse()


def parabolic_at(direction: float, step: float, o: HPoint = BASEPOINT) -> MobiusMap:
    """Parabólico que fija el extremo del rayo desde o en `direction`."""
    if step == 0.0:
        raise GeometryError("paso parabólico nulo")
    f = _aimed(direction, o)
    return f @ translation(step) @ f.inverse()


# -------------------- Grupos del catálogo -------------------- #
def cyclic_hyperbolic(L: float = 2.0, o: HPoint = BASEPOINT) -> GroupPresentation:
    return make_group([("h", hyperbolic_through(HALF_PI, L, o))], o)


def cyclic_parabolic(k: float = 1.0, o: HPoint = BASEPOINT) -> GroupPresentation:
    return make_group([("p", parabolic_at(HALF_PI, k, o))], o)


def symmetric_schottky(L: float = 3.0, o: HPoint = BASEPOINT) -> GroupPresentation:
    return make_group([("a", hyperbolic_through(0.0, L, o)),
                       ("b", hyperbolic_through(HALF_PI, L, o))], o)


def parabolic_pair(k: float = 4.0, o: HPoint = BASEPOINT) -> GroupPresentation:
    return make_group([("p", parabolic_at(HALF_PI, k, o)),
                       ("q", parabolic_at(3.0 * HALF_PI, k, o))], o)


def one_cusp(k: float = 4.0, L: float = 2.5, o: HPoint = BASEPOINT) -> GroupPresentation:
    return make_group([("p", parabolic_at(HALF_PI, k, o)),
                       ("h", hyperbolic_through(0.0, L, o))], o)


def cusp_product(k: float = 8.0, L: float = 4.5, o: HPoint = BASEPOINT) -> GroupPresentation:
    """Producto de Schottky de dos grupos con una cúspide cada uno."""
    left = make_group([("p1", parabolic_at(HALF_PI, k, o)),
                       ("h1", hyperbolic_through(0.0, L, o))], o)
    right = make_group([("p2", parabolic_at(3.0 * HALF_PI, k, o)),
                        ("h2", hyperbolic_through(0.5 * HALF_PI, L, o))], o)
    return schottky_product(left, right)


CATALOG: Dict[str, Callable[..., GroupPresentation]] = {
    "cyclic_hyperbolic": cyclic_hyperbolic,
    "cyclic_parabolic": cyclic_parabolic,
    "schottky": symmetric_schottky,
    "parabolic_pair": parabolic_pair,
    "one_cusp": one_cusp,
    "cusp_product": cusp_product,
}


def build_group(section: GroupSection) -> GroupPresentation:
    o = HPoint(*section.basepoint)
    if section.catalog is not None:
        builder = CATALOG.get(section.catalog)
        if builder is None:
            raise ConfigError("grupo desconocido en el catálogo", catalog=section.catalog,
                              known=sorted(CATALOG))
        try:
            return builder(o=o, **section.params)
        except TypeError as e:
            raise ConfigError("parámetros inválidos para el grupo",
                              catalog=section.catalog, reason=str(e)) from e
    gens = [(g.label, MobiusMap.from_entries(*g.matrix)) for g in section.generators]
    with_disks = [g.disk is not None and g.inverse_disk is not None for g in section.generators]
    if any(with_disks) and not all(with_disks):
        raise ConfigError("discos de ping-pong incompletos: todos o ninguno")
    disks = ([(g.disk, g.inverse_disk) for g in section.generators]  # type: ignore[misc]
             if all(with_disks) else None)
    return make_group(gens, o, disks)
