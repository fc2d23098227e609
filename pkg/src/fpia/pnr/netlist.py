"""Inter-cluster nets implied by a clustering.

Every spin drives a flip-flop output of its block; a net exists for each spin
that some other block lists among its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

from fpia.cluster import Clustering


@dataclass(frozen=True)
class Net:
    spin: int
    source: int
    sinks: tuple[int, ...]

    @property
    def blocks(self) -> tuple[int, ...]:
        return (self.source, *self.sinks)


@dataclass(frozen=True)
class Netlist:
    num_blocks: int
    nets: tuple[Net, ...]

    def __len__(self):
        return len(self.nets)

    def to_dict(self) -> dict:
        return {"num_blocks": self.num_blocks,
                "nets": [[n.spin, n.source, list(n.sinks)] for n in self.nets]}


def build_netlist(c: Clustering) -> Netlist:
    home = {s: b for b, cl in enumerate(c.clusters) for s in cl.members}
    sinks: dict[int, list[int]] = {}
    for b, cl in enumerate(c.clusters):
        for s in cl.input_union:
            if home[s] != b:
                sinks.setdefault(s, []).append(b)
    nets = tuple(Net(s, home[s], tuple(sorted(sinks[s]))) for s in sorted(sinks))
    return Netlist(len(c.clusters), nets)
