#include "dgan/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include "dgan/errors.hpp"
#include "dgan/rng.hpp"

namespace dgan {

void Dataset::validate() const {
    if (samples.rows == 0 || samples.cols == 0) throw SpecError("dataset: empty sample matrix");
    if (!samples.all_finite()) throw SpecError("dataset: non-finite sample");
    if (labels) {
        if (labels->size() != samples.rows)
            throw SpecError("dataset: label count does not match sample count");
        for (int l : *labels)
            if (l < 0) throw SpecError("dataset: negative label");
    }
    if (mode_centers && mode_centers->cols != samples.cols)
        throw SpecError("dataset: mode centers have wrong width");
}

Dataset make_ring(std::size_t modes, double radius, double sigma, std::size_t per_mode,
                  std::uint64_t seed) {
    if (modes < 1) throw SpecError("make_ring: need at least one mode");
    if (!(sigma > 0.0)) throw SpecError("make_ring: sigma must be positive");
    if (per_mode < 1) throw SpecError("make_ring: need at least one sample per mode");
    if (!std::isfinite(radius)) throw SpecError("make_ring: radius must be finite");

    Dataset ds;
    ds.samples = Matrix(modes * per_mode, 2);
    ds.labels = std::vector<int>(modes * per_mode);
    ds.mode_centers = Matrix(modes, 2);

    Rng rng(seed);
    for (std::size_t m = 0; m < modes; ++m) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) /
                             static_cast<double>(modes);
        const double cx = radius * std::cos(angle);
        const double cy = radius * std::sin(angle);
        (*ds.mode_centers)(m, 0) = cx;
        (*ds.mode_centers)(m, 1) = cy;
        for (std::size_t k = 0; k < per_mode; ++k) {
            const std::size_t row = m * per_mode + k;
            ds.samples(row, 0) = cx + sigma * rng.gaussian();
            ds.samples(row, 1) = cy + sigma * rng.gaussian();
            (*ds.labels)[row] = static_cast<int>(m);
        }
    }
    ds.validate();
    return ds;
}

namespace {

std::uint32_t read_u32_be(std::ifstream& f, const std::string& path, std::size_t offset) {
    std::uint8_t buf[4];
    if (!f.read(reinterpret_cast<char*>(buf), 4))
        throw IoError(path + ": truncated at offset " + std::to_string(offset));
    return (std::uint32_t{buf[0]} << 24) | (std::uint32_t{buf[1]} << 16) |
           (std::uint32_t{buf[2]} << 8) | std::uint32_t{buf[3]};
}

void write_u32_be(std::ofstream& f, std::uint32_t v) {
    const std::uint8_t buf[4] = {static_cast<std::uint8_t>(v >> 24),
                                 static_cast<std::uint8_t>(v >> 16),
                                 static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
    f.write(reinterpret_cast<const char*>(buf), 4);
}

} // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw IoError("cannot open: " + images_path);
    const std::uint32_t img_magic = read_u32_be(imgs, images_path, 0);
    if (img_magic != 0x00000803)
        throw IoError(images_path + ": bad magic at offset 0 (expected 0x00000803)");
    const std::uint32_t n = read_u32_be(imgs, images_path, 4);
    const std::uint32_t rows = read_u32_be(imgs, images_path, 8);
    const std::uint32_t cols = read_u32_be(imgs, images_path, 12);
    const std::size_t d = static_cast<std::size_t>(rows) * cols;
    if (n == 0 || d == 0) throw IoError(images_path + ": zero-sized image dimensions");

    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(n) * d);
    if (!imgs.read(reinterpret_cast<char*>(pixels.data()),
                   static_cast<std::streamsize>(pixels.size())))
        throw IoError(images_path + ": truncated pixel data at offset 16");

    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw IoError("cannot open: " + labels_path);
    const std::uint32_t lab_magic = read_u32_be(labs, labels_path, 0);
    if (lab_magic != 0x00000801)
        throw IoError(labels_path + ": bad magic at offset 0 (expected 0x00000801)");
    const std::uint32_t ln = read_u32_be(labs, labels_path, 4);
    if (ln != n)
        throw IoError(labels_path + ": label count " + std::to_string(ln) +
                      " does not match image count " + std::to_string(n));
    std::vector<std::uint8_t> raw_labels(ln);
    if (!labs.read(reinterpret_cast<char*>(raw_labels.data()),
                   static_cast<std::streamsize>(raw_labels.size())))
        throw IoError(labels_path + ": truncated label data at offset 8");

    Dataset ds;
    ds.samples = Matrix(n, d);
    for (std::size_t i = 0; i < pixels.size(); ++i)
        ds.samples.data[i] = static_cast<double>(pixels[i]) / 127.5 - 1.0;
    ds.labels = std::vector<int>(raw_labels.begin(), raw_labels.end());
    ds.validate();
    return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path,
               std::size_t rows, std::size_t cols) {
    if (rows * cols != ds.dim()) throw SpecError("write_idx: rows * cols must equal sample dim");
    if (!ds.labels) throw SpecError("write_idx: dataset has no labels");

    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) throw IoError("cannot open for writing: " + images_path);
    write_u32_be(imgs, 0x00000803);
    write_u32_be(imgs, static_cast<std::uint32_t>(ds.size()));
    write_u32_be(imgs, static_cast<std::uint32_t>(rows));
    write_u32_be(imgs, static_cast<std::uint32_t>(cols));
    for (double v : ds.samples.data) {
        const double byte = std::round((v + 1.0) * 127.5);
        if (byte < 0.0 || byte > 255.0)
            throw SpecError("write_idx: sample outside [-1, 1] is not byte-representable");
        const std::uint8_t b = static_cast<std::uint8_t>(byte);
        imgs.write(reinterpret_cast<const char*>(&b), 1);
    }

    std::ofstream labs(labels_path, std::ios::binary);
    if (!labs) throw IoError("cannot open for writing: " + labels_path);
    write_u32_be(labs, 0x00000801);
    write_u32_be(labs, static_cast<std::uint32_t>(ds.size()));
    for (int l : *ds.labels) {
        if (l < 0 || l > 255) throw SpecError("write_idx: label outside byte range");
        const std::uint8_t b = static_cast<std::uint8_t>(l);
        labs.write(reinterpret_cast<const char*>(&b), 1);
    }
}

namespace {

PartitionSet partition_by_label(const Dataset& ds, const ByLabel& scheme) {
    if (!ds.labels) throw SpecError("partition: ByLabel requires labels");
    if (scheme.groups.empty()) throw SpecError("partition: no groups");

    std::map<int, std::vector<int>> claimants; // label -> group ids
    for (std::size_t g = 0; g < scheme.groups.size(); ++g) {
        std::set<int> seen;
        for (int label : scheme.groups[g]) {
            if (!seen.insert(label).second)
                throw SpecError("partition: duplicate label " + std::to_string(label) +
                                " within group " + std::to_string(g));
            claimants[label].push_back(static_cast<int>(g));
        }
    }
    for (const auto& [label, owners] : claimants)
        if (owners.size() > 1 && !scheme.allow_shared)
            throw SpecError("partition: label " + std::to_string(label) +
                            " claimed by multiple groups");

    PartitionSet parts(scheme.groups.size());
    for (std::size_t g = 0; g < parts.size(); ++g) parts[g].owner = static_cast<int>(g);

    std::map<int, std::size_t> next_claimant; // rotates shared labels' samples
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const int label = (*ds.labels)[i];
        const auto it = claimants.find(label);
        if (it == claimants.end()) {
            if (!scheme.allow_unassigned)
                throw SpecError("partition: label " + std::to_string(label) +
                                " not claimed by any group");
            continue;
        }
        const std::vector<int>& owners = it->second;
        const std::size_t turn = next_claimant[label]++ % owners.size();
        parts[static_cast<std::size_t>(owners[turn])].indices.push_back(i);
    }
    return parts;
}

PartitionSet partition_shard(const Dataset& ds, const Shard& scheme) {
    if (scheme.users == 0) throw SpecError("partition: need at least one user");
    if (scheme.users > ds.size()) throw SpecError("partition: more users than samples");

    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(scheme.seed);
    rng.shuffle(order);

    PartitionSet parts(scheme.users);
    const std::size_t base = ds.size() / scheme.users;
    const std::size_t extra = ds.size() % scheme.users;
    std::size_t cursor = 0;
    for (std::size_t u = 0; u < scheme.users; ++u) {
        parts[u].owner = static_cast<int>(u);
        const std::size_t take = base + (u < extra ? 1 : 0);
        parts[u].indices.assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                                order.begin() + static_cast<std::ptrdiff_t>(cursor + take));
        cursor += take;
    }
    return parts;
}

} // namespace

PartitionSet partition(const Dataset& ds, const PartitionScheme& scheme) {
    ds.validate();
    if (const auto* by_label = std::get_if<ByLabel>(&scheme))
        return partition_by_label(ds, *by_label);
    return partition_shard(ds, std::get<Shard>(scheme));
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.samples = Matrix(indices.size(), ds.dim());
    if (ds.labels) out.labels = std::vector<int>(indices.size());
    out.mode_centers = ds.mode_centers;
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t src = indices[r];
        if (src >= ds.size()) throw SpecError("subset: index out of range");
        for (std::size_t c = 0; c < ds.dim(); ++c) out.samples(r, c) = ds.samples(src, c);
        if (ds.labels) (*out.labels)[r] = (*ds.labels)[src];
    }
    return out;
}

void dataset_to_csv(const Dataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    for (std::size_t c = 0; c < ds.dim(); ++c) f << (c ? "," : "") << 'x' << c;
    if (ds.labels) f << ",label";
    f << '\n';
    char buf[64];
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (std::size_t c = 0; c < ds.dim(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.samples(r, c));
            f << (c ? "," : "") << buf;
        }
        if (ds.labels) f << ',' << (*ds.labels)[r];
        f << '\n';
    }
}

} // namespace dgan
