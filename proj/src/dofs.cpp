#include "ieti/dofs.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>

#include "ieti/assembly.hpp"
#include "ieti/error.hpp"

namespace ieti::dp {

using geometry::Side;

int DofPartition::trace_size() const
{
    int n = 0;
    for (const auto& p : patches)
        n += p.num_boundary();
    return n;
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    int add()
    {
        parent.push_back(static_cast<int>(parent.size()));
        return parent.back();
    }
    int find(int i)
    {
        while (parent[i] != i)
            i = parent[i] = parent[parent[i]];
        return i;
    }
    void unite(int a, int b)
    {
        a = find(a);
        b = find(b);
        if (a != b)
            parent[std::max(a, b)] = std::min(a, b);
    }
};

} // namespace

DofPartition build_partition(const geometry::MultiPatch& mp)
{
    DofPartition part;
    const int np = mp.num_patches();
    part.patches.resize(static_cast<std::size_t>(np));
    for (int k = 0; k < np; ++k) {
        auto& pp = part.patches[k];
        const auto& space = mp.patch(k).space;
        std::vector<Side> interface_sides;
        for (int s = 0; s < 4; ++s) {
            const auto side = static_cast<Side>(s);
            if (mp.is_dirichlet(k, side))
                pp.dirichlet_sides.push_back(side);
            else if (mp.interface_of(k, side))
                interface_sides.push_back(side);
        }
        if (pp.dirichlet_sides.empty() && interface_sides.empty())
            throw ValidationError("build_partition: patch " + std::to_string(k) +
                                  " has neither interface nor Dirichlet boundary");
        const auto eliminated = assembly::dofs_on_sides(space, pp.dirichlet_sides);
        const auto on_interface = assembly::dofs_on_sides(space, interface_sides);
        pp.full_to_active.assign(static_cast<std::size_t>(space.size()), 0);
        for (int d : eliminated)
            pp.full_to_active[d] = -1;
        for (int i = 0; i < space.size(); ++i) {
            if (pp.full_to_active[i] == 0) {
                pp.full_to_active[i] = static_cast<int>(pp.active.size());
                pp.active.push_back(i);
            }
        }
        std::vector<bool> is_b(static_cast<std::size_t>(space.size()), false);
        for (int d : on_interface)
            is_b[d] = pp.full_to_active[d] >= 0;
        pp.active_to_boundary.assign(pp.active.size(), -1);
        for (int a = 0; a < pp.num_active(); ++a) {
            if (is_b[pp.active[a]]) {
                pp.active_to_boundary[a] = static_cast<int>(pp.boundary.size());
                pp.boundary.push_back(a);
            } else {
                pp.interior.push_back(a);
            }
        }
    }

    // identify trace copies across interfaces
    UnionFind uf;
    std::vector<std::vector<int>> uf_id(static_cast<std::size_t>(np));
    for (int k = 0; k < np; ++k) {
        uf_id[k].resize(part.patches[k].boundary.size());
        for (auto& id : uf_id[k])
            id = uf.add();
    }
    for (const auto& f : mp.interfaces()) {
        const auto pairs = geometry::match_interface_dofs(mp, f.patch_a, f.patch_b);
        const auto& pa = part.patches[f.patch_a];
        const auto& pb = part.patches[f.patch_b];
        for (const auto& [da, db] : pairs) {
            const int aa = pa.full_to_active[da];
            const int ab = pb.full_to_active[db];
            if ((aa < 0) != (ab < 0))
                throw ValidationError("build_partition: inconsistent Dirichlet data across an interface");
            if (aa < 0)
                continue;
            uf.unite(uf_id[f.patch_a][pa.active_to_boundary[aa]],
                     uf_id[f.patch_b][pb.active_to_boundary[ab]]);
        }
    }
    std::map<int, int> root_to_node;
    for (int k = 0; k < np; ++k) {
        auto& pp = part.patches[k];
        pp.boundary_node.resize(pp.boundary.size());
        for (int b = 0; b < pp.num_boundary(); ++b) {
            const int root = uf.find(uf_id[k][b]);
            auto [it, inserted] = root_to_node.try_emplace(root, part.num_nodes());
            if (inserted)
                part.node_copies.emplace_back();
            pp.boundary_node[b] = it->second;
            part.node_copies[it->second].push_back({k, b});
        }
    }
    for (const auto& copies : part.node_copies)
        if (copies.size() < 2)
            throw ValidationError("build_partition: interface dof without a partner copy");
    return part;
}

TraceVector zero_trace(const DofPartition& part)
{
    TraceVector w;
    for (const auto& p : part.patches)
        w.push_back(la::Vector::Zero(p.num_boundary()));
    return w;
}

la::Vector JumpOperator::apply(const TraceVector& w) const
{
    la::Vector out(size());
    for (int r = 0; r < size(); ++r)
        out[r] = w[rows[r].plus.patch][rows[r].plus.pos] - w[rows[r].minus.patch][rows[r].minus.pos];
    return out;
}

void JumpOperator::apply_transpose_add(const la::Vector& lambda, TraceVector& w) const
{
    for (int r = 0; r < size(); ++r) {
        w[rows[r].plus.patch][rows[r].plus.pos] += lambda[r];
        w[rows[r].minus.patch][rows[r].minus.pos] -= lambda[r];
    }
}

la::Vector JumpOperator::apply_scaled(const TraceVector& w) const
{
    la::Vector out(size());
    for (int r = 0; r < size(); ++r)
        out[r] = rows[r].scaled *
                 (w[rows[r].plus.patch][rows[r].plus.pos] - w[rows[r].minus.patch][rows[r].minus.pos]);
    return out;
}

void JumpOperator::apply_scaled_transpose_add(const la::Vector& lambda, TraceVector& w) const
{
    for (int r = 0; r < size(); ++r) {
        w[rows[r].plus.patch][rows[r].plus.pos] += rows[r].scaled * lambda[r];
        w[rows[r].minus.patch][rows[r].minus.pos] -= rows[r].scaled * lambda[r];
    }
}

JumpOperator build_jump_operators(const DofPartition& part, const std::vector<bool>& excluded_nodes)
{
    JumpOperator b;
    for (int n = 0; n < part.num_nodes(); ++n) {
        if (!excluded_nodes.empty() && excluded_nodes[n])
            continue;
        const auto& copies = part.node_copies[n];
        const double scale = 1.0 / static_cast<double>(copies.size());
        for (std::size_t c = 0; c + 1 < copies.size(); ++c)
            b.rows.push_back({copies[c], copies[c + 1], scale});
    }
    return b;
}

std::vector<int> PatchConstraints::global_ids() const
{
    std::vector<int> ids;
    for (const auto& r : rows)
        ids.push_back(r.global_id);
    return ids;
}

PrimalConstraints build_constraints(const geometry::MultiPatch& mp, const DofPartition& part)
{
    PrimalConstraints pc;
    const int np = mp.num_patches();
    pc.patches.resize(static_cast<std::size_t>(np));
    pc.primal_nodes.assign(static_cast<std::size_t>(part.num_nodes()), false);
    std::vector<bool> vertex_node(static_cast<std::size_t>(part.num_nodes()), false);

    // vertex values
    for (const auto& v : mp.vertices()) {
        if (v.corners.size() < 2)
            continue;
        const auto [k, corner] = v.corners.front();
        const auto& pp = part.patches[k];
        const int a = pp.full_to_active[geometry::corner_dof(mp.patch(k).space, corner)];
        if (a < 0 || pp.active_to_boundary[a] < 0)
            continue;
        const int node = pp.boundary_node[pp.active_to_boundary[a]];
        if (vertex_node[node])
            continue;
        vertex_node[node] = true;
        pc.primal_nodes[node] = true;
        const int gid = pc.num_primal();
        pc.kinds.push_back(PrimalKind::Vertex);
        for (const auto& copy : part.node_copies[node])
            pc.patches[copy.patch].rows.push_back({PrimalKind::Vertex, gid, {{copy.pos, 1.0}}, -1});
    }

    // edge averages
    for (const auto& f : mp.interfaces()) {
        const auto& pa = part.patches[f.patch_a];
        const auto& space = mp.patch(f.patch_a).space;
        const auto dofs = geometry::side_dofs(space, f.side_a);
        const auto integrals = geometry::side_knots(space, f.side_a).basis_integrals();
        std::vector<std::pair<int, double>> node_weights;
        std::vector<int> free_nodes;
        for (std::size_t i = 0; i < dofs.size(); ++i) {
            const int a = pa.full_to_active[dofs[i]];
            if (a < 0)
                continue;
            const int node = pa.boundary_node[pa.active_to_boundary[a]];
            node_weights.emplace_back(node, integrals[i]);
            if (!vertex_node[node])
                free_nodes.push_back(node);
        }
        if (free_nodes.empty())
            continue;
        double total = 0.0;
        for (const auto& [n, w] : node_weights)
            total += w;
        const int designated = free_nodes[free_nodes.size() / 2];
        pc.primal_nodes[designated] = true;
        const int gid = pc.num_primal();
        pc.kinds.push_back(PrimalKind::Edge);
        for (int k : {f.patch_a, f.patch_b}) {
            PrimalRow row{PrimalKind::Edge, gid, {}, -1};
            for (const auto& [node, w] : node_weights) {
                for (const auto& copy : part.node_copies[node]) {
                    if (copy.patch != k)
                        continue;
                    row.entries.emplace_back(copy.pos, w / total);
                    if (node == designated)
                        row.designated = copy.pos;
                }
            }
            std::sort(row.entries.begin(), row.entries.end());
            pc.patches[k].rows.push_back(std::move(row));
        }
    }

    for (int k = 0; k < np; ++k) {
        auto& pk = pc.patches[k];
        std::vector<la::Triplet> t;
        for (int r = 0; r < pk.size(); ++r)
            for (const auto& [pos, w] : pk.rows[r].entries)
                t.push_back({r, pos, w});
        pk.c = la::SparseMatrix::from_triplets(pk.size(), part.patches[k].num_boundary(), std::move(t));
    }
    return pc;
}

} // namespace ieti::dp
