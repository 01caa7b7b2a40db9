#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "dgan/matrix.hpp"
#include "dgan/nn.hpp"

namespace dgan {

// Sparse slice of a local gradient, ready for upload.
struct GradUpdate {
    int user_id = 0;
    std::size_t epoch = 0;
    std::vector<std::pair<std::size_t, double>> entries; // strictly increasing indices

    void validate(std::size_t param_count) const; // throws SpecError
};

struct RandomFraction {
    double fraction = 1.0; // in (0, 1]
    std::uint64_t seed = 0;
};

struct Threshold {
    double tau = 0.0; // positive
};

struct MaxMagnitude {};

using SelectionPolicy = std::variant<RandomFraction, Threshold, MaxMagnitude>;

std::string policy_name(const SelectionPolicy& policy);
void validate_policy(const SelectionPolicy& policy); // throws SpecError

struct ServerState {
    NetworkSpec spec;
    ParamVector w_s;
    SelectionPolicy policy = MaxMagnitude{};
    double lr_server = 0.1;
    std::size_t epoch = 0;
};

ServerState make_server(const NetworkSpec& spec, std::uint64_t init_seed,
                        SelectionPolicy policy, double lr_server);

enum class MessageKind { GradUpload, GlobalGradBroadcast, FakeSampleBatch, ScalarScores,
                         WeightSnapshot };

std::string kind_name(MessageKind kind);

// Samples in flight are always generator output. There is deliberately no
// payload variant able to carry rows of a real dataset, so the privacy audit
// can be structural rather than heuristic.
enum class SampleProvenance { Generated };

struct FakeSamples {
    Matrix samples;
    SampleProvenance provenance = SampleProvenance::Generated;
};

// A critic's verdict on a batch it was shown, plus the gradient of its loss
// w.r.t. those samples (sample-shaped, but derived from generated data).
struct ScoreFeedback {
    std::vector<double> scores;
    Matrix input_grads;
    SampleProvenance provenance = SampleProvenance::Generated;
};

struct WeightPayload {
    std::vector<double> values;
};

using MessagePayload = std::variant<GradUpdate, GradVector, FakeSamples, ScoreFeedback,
                                    WeightPayload>;

struct ChannelMessage {
    std::size_t epoch = 0;
    std::string from;
    std::string to;
    MessageKind kind = MessageKind::FakeSampleBatch;
    MessagePayload payload;
    std::size_t byte_size = 0;
};

// Sparse payloads cost 12 bytes of header per entry plus the 8-byte value;
// dense payloads cost one 12-byte header plus 8 bytes per real.
std::size_t payload_bytes(const MessagePayload& payload);

ChannelMessage make_message(std::size_t epoch, std::string from, std::string to,
                            MessageKind kind, MessagePayload payload);

// epoch,from,to,kind,bytes header plus one line per message
std::string channel_log_text(const std::vector<ChannelMessage>& messages);

// Append-only, thread-safe message log. Epochs must be non-decreasing.
class ChannelLog {
  public:
    void append(ChannelMessage msg); // throws SpecError on epoch regression
    std::vector<ChannelMessage> snapshot() const;
    std::size_t size() const;
    void export_to(const std::string& path) const; // epoch,from,to,kind,bytes lines
    std::string to_text() const;

  private:
    mutable std::mutex mu_;
    std::vector<ChannelMessage> messages_;
    std::size_t last_epoch_ = 0;
};

// Keeps the ceil(fraction * len) coordinates of largest magnitude; ties go to
// the lower flat index. The seed is accepted for interface stability but the
// top-magnitude rule itself is deterministic.
GradUpdate select_upload(const GradVector& local_grad, double fraction, std::uint64_t seed,
                         int user_id, std::size_t epoch);

GradVector aggregate(const ServerState& server, const std::vector<GradUpdate>& uploads);

void apply_global(ServerState& server, const GradVector& agg);

struct BroadcastTarget {
    int user_id = 0;
    Network* model = nullptr;
    double lr = 0.1;
};

void broadcast(const ServerState& server, const GradVector& agg,
               const std::vector<BroadcastTarget>& users, ChannelLog& log);

struct AuditReport {
    struct KindStats {
        std::size_t count = 0;
        std::size_t bytes = 0;
    };
    std::map<std::string, KindStats> per_kind;
    std::vector<std::string> flags; // data-like payloads; empty by construction

    std::string to_text() const;
};

// raw_sample_dim: width of the users' real samples, used to decide whether a
// payload is sample-shaped at all.
AuditReport audit_channel(const std::vector<ChannelMessage>& log, std::size_t raw_sample_dim);

} // namespace dgan
