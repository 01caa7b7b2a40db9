#include "dgan/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dgan/errors.hpp"
#include "dgan/rng.hpp"

namespace dgan {

void GradUpdate::validate(std::size_t param_count) const {
    std::size_t prev = 0;
    bool first = true;
    for (const auto& [index, value] : entries) {
        if (!first && index <= prev)
            throw SpecError("grad update: indices must be strictly increasing");
        if (index >= param_count) throw SpecError("grad update: index out of range");
        if (!std::isfinite(value)) throw SpecError("grad update: non-finite value");
        prev = index;
        first = false;
    }
}

std::string policy_name(const SelectionPolicy& policy) {
    if (std::holds_alternative<RandomFraction>(policy)) return "random_fraction";
    if (std::holds_alternative<Threshold>(policy)) return "threshold";
    return "max_magnitude";
}

void validate_policy(const SelectionPolicy& policy) {
    if (const auto* rf = std::get_if<RandomFraction>(&policy)) {
        if (!(rf->fraction > 0.0) || rf->fraction > 1.0)
            throw SpecError("selection policy: fraction must be in (0, 1]");
    } else if (const auto* th = std::get_if<Threshold>(&policy)) {
        if (!(th->tau > 0.0)) throw SpecError("selection policy: threshold must be positive");
    }
}

ServerState make_server(const NetworkSpec& spec, std::uint64_t init_seed,
                        SelectionPolicy policy, double lr_server) {
    validate_policy(policy);
    if (!(lr_server > 0.0)) throw SpecError("server: lr_server must be positive");
    ServerState s;
    s.spec = spec;
    s.w_s = build_network(spec, init_seed).params;
    s.policy = policy;
    s.lr_server = lr_server;
    return s;
}

std::string kind_name(MessageKind kind) {
    switch (kind) {
        case MessageKind::GradUpload: return "GradUpload";
        case MessageKind::GlobalGradBroadcast: return "GlobalGradBroadcast";
        case MessageKind::FakeSampleBatch: return "FakeSampleBatch";
        case MessageKind::ScalarScores: return "ScalarScores";
        case MessageKind::WeightSnapshot: return "WeightSnapshot";
    }
    return "?";
}

namespace {

constexpr std::size_t kEntryHeader = 12;
constexpr std::size_t kReal = 8;

std::size_t dense_bytes(std::size_t reals) { return kEntryHeader + kReal * reals; }

} // namespace

std::size_t payload_bytes(const MessagePayload& payload) {
    if (const auto* gu = std::get_if<GradUpdate>(&payload))
        return gu->entries.size() * (kEntryHeader + kReal);
    if (const auto* gv = std::get_if<GradVector>(&payload)) return dense_bytes(gv->size());
    if (const auto* fs = std::get_if<FakeSamples>(&payload))
        return dense_bytes(fs->samples.data.size());
    if (const auto* sc = std::get_if<ScoreFeedback>(&payload))
        return dense_bytes(sc->scores.size() + sc->input_grads.data.size());
    return dense_bytes(std::get<WeightPayload>(payload).values.size());
}

ChannelMessage make_message(std::size_t epoch, std::string from, std::string to,
                            MessageKind kind, MessagePayload payload) {
    const bool ok =
        (kind == MessageKind::GradUpload && std::holds_alternative<GradUpdate>(payload)) ||
        (kind == MessageKind::GlobalGradBroadcast && std::holds_alternative<GradVector>(payload)) ||
        (kind == MessageKind::FakeSampleBatch && std::holds_alternative<FakeSamples>(payload)) ||
        (kind == MessageKind::ScalarScores && std::holds_alternative<ScoreFeedback>(payload)) ||
        (kind == MessageKind::WeightSnapshot && std::holds_alternative<WeightPayload>(payload));
    if (!ok) throw SpecError("channel message: payload does not match kind " + kind_name(kind));
    ChannelMessage m;
    m.epoch = epoch;
    m.from = std::move(from);
    m.to = std::move(to);
    m.kind = kind;
    m.byte_size = payload_bytes(payload);
    m.payload = std::move(payload);
    return m;
}

void ChannelLog::append(ChannelMessage msg) {
    std::lock_guard<std::mutex> lock(mu_);
    if (!messages_.empty() && msg.epoch < last_epoch_)
        throw SpecError("channel log: epoch must be non-decreasing");
    last_epoch_ = msg.epoch;
    messages_.push_back(std::move(msg));
}

std::vector<ChannelMessage> ChannelLog::snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return messages_;
}

std::size_t ChannelLog::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return messages_.size();
}

std::string channel_log_text(const std::vector<ChannelMessage>& messages) {
    std::ostringstream out;
    out << "epoch,from,to,kind,bytes\n";
    for (const ChannelMessage& m : messages)
        out << m.epoch << ',' << m.from << ',' << m.to << ',' << kind_name(m.kind) << ','
            << m.byte_size << '\n';
    return out.str();
}

std::string ChannelLog::to_text() const {
    std::lock_guard<std::mutex> lock(mu_);
    return channel_log_text(messages_);
}

void ChannelLog::export_to(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << to_text();
}

GradUpdate select_upload(const GradVector& local_grad, double fraction, std::uint64_t /*seed*/,
                         int user_id, std::size_t epoch) {
    if (local_grad.empty()) throw SpecError("select_upload: empty gradient");
    if (!(fraction > 0.0) || fraction > 1.0)
        throw SpecError("select_upload: fraction must be in (0, 1]");

    const std::size_t k = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(local_grad.size())));
    std::vector<std::size_t> order(local_grad.size());
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double ma = std::abs(local_grad[a]);
                          const double mb = std::abs(local_grad[b]);
                          if (ma != mb) return ma > mb;
                          return a < b;
                      });
    order.resize(k);
    std::sort(order.begin(), order.end());

    GradUpdate up;
    up.user_id = user_id;
    up.epoch = epoch;
    up.entries.reserve(k);
    for (std::size_t index : order) up.entries.emplace_back(index, local_grad[index]);
    return up;
}

GradVector aggregate(const ServerState& server, const std::vector<GradUpdate>& uploads) {
    const std::size_t n = server.w_s.values.size();
    for (const GradUpdate& up : uploads) {
        if (up.epoch != server.epoch) throw SpecError("aggregate: upload from a different epoch");
        up.validate(n);
    }

    GradVector out(n, 0.0);

    if (std::holds_alternative<MaxMagnitude>(server.policy)) {
        // winner per index: largest magnitude, ties to the lowest user_id
        std::vector<int> winner(n, -1);
        for (const GradUpdate& up : uploads) {
            for (const auto& [index, value] : up.entries) {
                if (winner[index] < 0 || std::abs(value) > std::abs(out[index]) ||
                    (std::abs(value) == std::abs(out[index]) && up.user_id < winner[index])) {
                    out[index] = value;
                    winner[index] = up.user_id;
                }
            }
        }
        return out;
    }

    std::vector<std::size_t> hits(n, 0);
    for (const GradUpdate& up : uploads) {
        for (const auto& [index, value] : up.entries) {
            out[index] += value;
            ++hits[index];
        }
    }
    std::vector<std::size_t> contributed;
    for (std::size_t i = 0; i < n; ++i) {
        if (hits[i] > 0) {
            out[i] /= static_cast<double>(hits[i]);
            contributed.push_back(i);
        }
    }

    if (const auto* th = std::get_if<Threshold>(&server.policy)) {
        for (std::size_t i : contributed)
            if (std::abs(out[i]) <= th->tau) out[i] = 0.0;
        return out;
    }

    const auto& rf = std::get<RandomFraction>(server.policy);
    if (contributed.empty()) return out;
    const std::size_t keep = static_cast<std::size_t>(
        std::ceil(rf.fraction * static_cast<double>(contributed.size())));
    Rng rng(mix_seed(rf.seed, server.epoch));
    // partial Fisher-Yates: the first `keep` slots become the kept subset
    for (std::size_t i = 0; i < keep; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(
                                      rng.below(static_cast<std::uint64_t>(contributed.size() - i)));
        std::swap(contributed[i], contributed[j]);
    }
    std::vector<bool> kept(n, false);
    for (std::size_t i = 0; i < keep; ++i) kept[contributed[i]] = true;
    for (std::size_t i = 0; i < n; ++i)
        if (!kept[i]) out[i] = 0.0;
    return out;
}

void apply_global(ServerState& server, const GradVector& agg) {
    if (agg.size() != server.w_s.values.size())
        throw SpecError("apply_global: gradient length does not match server layout");
    for (std::size_t i = 0; i < agg.size(); ++i) server.w_s.values[i] -= server.lr_server * agg[i];
    ++server.epoch;
}

void broadcast(const ServerState& server, const GradVector& agg,
               const std::vector<BroadcastTarget>& users, ChannelLog& log) {
    for (const BroadcastTarget& target : users) {
        if (!target.model) throw SpecError("broadcast: null user model");
        if (agg.size() != target.model->params.values.size())
            throw SpecError("broadcast: gradient length does not match user layout");
        log.append(make_message(server.epoch, "server", "user" + std::to_string(target.user_id),
                                MessageKind::GlobalGradBroadcast, agg));
        for (std::size_t i = 0; i < agg.size(); ++i)
            target.model->params.values[i] -= target.lr * agg[i];
    }
}

std::string AuditReport::to_text() const {
    std::ostringstream out;
    out << "kind,count,bytes\n";
    for (const auto& [kind, stats] : per_kind)
        out << kind << ',' << stats.count << ',' << stats.bytes << '\n';
    out << "flags," << flags.size() << "\n";
    for (const std::string& f : flags) out << "flag," << f << '\n';
    return out.str();
}

AuditReport audit_channel(const std::vector<ChannelMessage>& log, std::size_t raw_sample_dim) {
    AuditReport report;
    for (std::size_t i = 0; i < log.size(); ++i) {
        const ChannelMessage& m = log[i];
        auto& stats = report.per_kind[kind_name(m.kind)];
        ++stats.count;
        stats.bytes += m.byte_size;

        // sample-shaped payloads are suspects; they pass only because their
        // provenance is generator output, the single constructible tag
        bool sample_shaped = false;
        SampleProvenance provenance = SampleProvenance::Generated;
        if (const auto* fs = std::get_if<FakeSamples>(&m.payload)) {
            sample_shaped = fs->samples.cols == raw_sample_dim;
            provenance = fs->provenance;
        } else if (const auto* sc = std::get_if<ScoreFeedback>(&m.payload)) {
            sample_shaped = sc->input_grads.cols == raw_sample_dim;
            provenance = sc->provenance;
        }
        if (sample_shaped && provenance != SampleProvenance::Generated)
            report.flags.push_back("message " + std::to_string(i) + " (" + kind_name(m.kind) +
                                   ") carries a sample-shaped payload of unknown provenance");
    }
    return report;
}

} // namespace dgan
