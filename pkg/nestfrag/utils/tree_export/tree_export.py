import json
import os
from dataclasses import dataclass, field

import nestfrag
from nestfrag.errors import NestFragError


@dataclass
class Lineage:
    """One edge of a species or gene tree: a block alive from start to end."""

    block: tuple
    start: float
    end: float = None
    children: list = field(default_factory=list)
    label: str = None

    def to_dict(self):
        out = {"block": list(self.block), "start": self.start, "end": self.end}
        if self.label is not None:
            out["label"] = self.label
        return out


@dataclass(frozen=True)
class NestedTree:
    species_roots: tuple
    gene_roots: tuple
    containment: tuple
    species_newick: str
    gene_newick: str


def _number(value):
    return format(value, '.10g')


def _newick(node):
    if node.children:
        inner = ",".join(_newick(child) for child in node.children)
        return f"({inner}):{_number(node.end - node.start)}"
    return f"{node.label}:{_number(node.end - node.start)}"


def to_newick(roots):
    if len(roots) == 1:
        return _newick(roots[0]) + ";"
    return "(" + ",".join(_newick(root) for root in roots) + ");"


def _grow(blocks_before, blocks_after, alive, t):
    # close every lineage whose block fragmented and open its children
    kept = set(blocks_after)
    for block in blocks_before:
        if block in kept:
            continue
        parent = alive.pop(block)
        parent.end = t
        members = set(block)
        for child in blocks_after:
            if members.issuperset(child):
                node = Lineage(child, t)
                parent.children.append(node)
                alive[child] = node


def _lineages(trajectory, blocks_of, prefix):
    roots = [Lineage(b, 0.0) for b in blocks_of(trajectory.initial)]
    alive = {node.block: node for node in roots}
    all_nodes = list(roots)
    for t, before, after in trajectory.jumps():
        known = set(alive)
        _grow(blocks_of(before), blocks_of(after), alive, t)
        all_nodes += [node for block, node in alive.items() if block not in known]

    end = trajectory.end_time
    for k, block in enumerate(blocks_of(trajectory.final_state)):
        leaf = alive[block]
        leaf.end = max(end, leaf.start)
        leaf.label = f"{prefix}{k + 1}"
    return roots, all_nodes


def _active(node, t0, t1):
    if t0 == t1:
        return node.start <= t0 <= node.end
    return node.start < t1 and t0 < node.end


def export_tree(trajectory):
    """
    Species and gene trees of a trajectory.

    Every outer (inner) block alive at some time is an edge of the species (gene)
    tree, with length its lifetime. Leaves are the final blocks, labeled s<k> and
    g<k> in canonical block order, and end at the trajectory end time.

    Returns:
        NestedTree: Both trees, their Newick texts and the gene-to-species containment
    """
    species_roots, species = _lineages(trajectory, lambda pi: pi.xi.blocks, "s")
    gene_roots, genes = _lineages(trajectory, lambda pi: pi.zeta.blocks, "g")

    containment = []
    for gene in genes:
        members = set(gene.block)
        hosts = [s for s in species if members <= set(s.block) and _active(s, gene.start, gene.end)]
        containment.append({"gene": gene.to_dict(), "species": [s.to_dict() for s in hosts]})

    return NestedTree(
        species_roots=tuple(species_roots),
        gene_roots=tuple(gene_roots),
        containment=tuple(containment),
        species_newick=to_newick(species_roots),
        gene_newick=to_newick(gene_roots),
    )


def artifact_comment(run_config):
    return f"[nestfrag {nestfrag.__version__} run_config={json.dumps(run_config, sort_keys=True)}]"


def write_tree_files(tree, stem, run_config=None):
    """Write <stem>.species.nwk, <stem>.gene.nwk and <stem>.map.json; returns the paths."""
    comment = artifact_comment(run_config or {})
    paths = {
        "species": f"{stem}.species.nwk",
        "gene": f"{stem}.gene.nwk",
        "map": f"{stem}.map.json",
    }
    folder = os.path.dirname(stem)
    try:
        if folder:
            os.makedirs(folder, exist_ok=True)
        with open(paths["species"], 'w') as f:
            f.write(f"{comment}\n{tree.species_newick}\n")
        with open(paths["gene"], 'w') as f:
            f.write(f"{comment}\n{tree.gene_newick}\n")
        with open(paths["map"], 'w') as f:
            json.dump({"header": {"version": nestfrag.__version__, "run_config": run_config or {}},
                       "containment": list(tree.containment)}, f, indent=2)
    except OSError as e:
        raise NestFragError("IO", f"cannot write tree files for {stem}: {e}")
    return paths
