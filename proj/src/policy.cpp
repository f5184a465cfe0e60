#include "tokenlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tokenlab {

namespace {

constexpr uint32_t kCheckpointMagic = 0x544b4c42;  // "TKLB"
constexpr uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

Vocabulary Vocabulary::standard(int size) {
    if (size < kMinSize) throw std::invalid_argument("Vocabulary: size must be at least 17");
    Vocabulary v;
    v.names_ = {"<pad>", "<eos>", "<think>", "</think>", "<answer>", "</answer>"};
    for (int d = 0; d < 10; ++d) v.names_.push_back("d" + std::to_string(d));
    v.names_.push_back("<q>");
    for (int i = kMinSize; i < size; ++i) v.names_.push_back("f" + std::to_string(i - kMinSize));
    return v;
}

const std::string& Vocabulary::name(int id) const {
    if (id < 0 || id >= size()) throw std::invalid_argument("Vocabulary: id out of range");
    return names_[static_cast<size_t>(id)];
}

int Vocabulary::id(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
        if (names_[static_cast<size_t>(i)] == name) return i;
    return -1;
}

void PolicyNet::check_dims() const {
    if (dims_.vocab < 2 || dims_.embed < 1 || dims_.context < 1 || dims_.hidden.empty())
        throw std::invalid_argument("PolicyNet: bad dimensions");
    for (int h : dims_.hidden)
        if (h < 1) throw std::invalid_argument("PolicyNet: bad hidden width");
}

PolicyNet::PolicyNet(PolicyDims dims, uint64_t seed, double init_scale) : dims_(std::move(dims)), seed_(seed) {
    check_dims();
    Rng rng = Rng::derive(seed, "init");
    Tensor embed(dims_.vocab, dims_.embed);
    for (int i = 0; i < embed.size(); ++i) embed[i] = init_scale * rng.uniform(-0.5, 0.5);
    params_.push_back(std::move(embed));
    int fan_in = dims_.context * dims_.embed;
    for (int h : dims_.hidden) {
        const double s = init_scale * std::sqrt(1.0 / fan_in);
        Tensor w(h, fan_in);
        for (int i = 0; i < w.size(); ++i) w[i] = rng.uniform(-s, s);
        params_.push_back(std::move(w));
        params_.push_back(Tensor::vec(h));
        fan_in = h;
    }
    const double s = init_scale * std::sqrt(1.0 / fan_in);
    Tensor head(dims_.vocab, fan_in);
    for (int i = 0; i < head.size(); ++i) head[i] = rng.uniform(-s, s);
    params_.push_back(std::move(head));
    params_.push_back(Tensor::vec(dims_.vocab));
}

PolicyNet PolicyNet::zeros(PolicyDims dims) {
    PolicyNet net;
    net.dims_ = std::move(dims);
    net.seed_ = 0;
    net.check_dims();
    net.params_.push_back(Tensor(net.dims_.vocab, net.dims_.embed));
    int fan_in = net.dims_.context * net.dims_.embed;
    for (int h : net.dims_.hidden) {
        net.params_.push_back(Tensor(h, fan_in));
        net.params_.push_back(Tensor::vec(h));
        fan_in = h;
    }
    net.params_.push_back(Tensor(net.dims_.vocab, fan_in));
    net.params_.push_back(Tensor::vec(net.dims_.vocab));
    return net;
}

int PolicyNet::scalar_count() const {
    int n = 0;
    for (const Tensor& p : params_) n += p.size();
    return n;
}

bool PolicyNet::params_finite() const {
    for (const Tensor& p : params_)
        if (!p.all_finite()) return false;
    return true;
}

std::vector<int> PolicyNet::context_of(std::span<const int> prefix, int pad_id) const {
    const int k = dims_.context;
    std::vector<int> ctx(static_cast<size_t>(k), pad_id);
    const int n = static_cast<int>(prefix.size());
    const int take = std::min(n, k);
    for (int i = 0; i < take; ++i) ctx[static_cast<size_t>(k - take + i)] = prefix[static_cast<size_t>(n - take + i)];
    return ctx;
}

PolicyNet::ForwardTrace PolicyNet::forward_trace(std::span<const int> context) const {
    if (static_cast<int>(context.size()) != dims_.context)
        throw std::invalid_argument("forward_trace: context length mismatch");
    const Tensor& embed = params_[0];
    for (int id : context)
        if (id < 0 || id >= dims_.vocab) throw std::invalid_argument("forward_trace: token id out of range");
    ForwardTrace tr;
    tr.input = Tensor::vec(dims_.context * dims_.embed);
    for (int t = 0; t < dims_.context; ++t)
        for (int j = 0; j < dims_.embed; ++j) tr.input[t * dims_.embed + j] = embed(context[static_cast<size_t>(t)], j);
    Tensor h = tr.input;
    size_t idx = 1;
    for (size_t l = 0; l < dims_.hidden.size(); ++l) {
        h = kernels::tanh_vec(kernels::add(kernels::matvec(params_[idx], h), params_[idx + 1]));
        tr.hidden.push_back(h);
        idx += 2;
    }
    tr.logits = kernels::add(kernels::matvec(params_[idx], h), params_[idx + 1]);
    return tr;
}

Tensor PolicyNet::forward_logits(std::span<const int> context) const { return forward_trace(context).logits; }

double PolicyNet::logp_of(std::span<const int> context, int token) const {
    return kernels::log_prob(forward_logits(context), token);
}

double PolicyNet::prob_of(std::span<const int> context, int token) const {
    return std::exp(logp_of(context, token));
}

PolicyNet::TapeBinding PolicyNet::bind(Tape& tape) const {
    TapeBinding b;
    b.param_ids.reserve(params_.size());
    for (const Tensor& p : params_) b.param_ids.push_back(tape.input(p));
    return b;
}

PolicyNet::TokenNodes PolicyNet::forward_on_tape(Tape& tape, const TapeBinding& binding,
                                                 std::span<const int> context, int token) const {
    if (static_cast<int>(context.size()) != dims_.context)
        throw std::invalid_argument("forward_on_tape: context length mismatch");
    if (binding.param_ids.size() != params_.size())
        throw std::invalid_argument("forward_on_tape: binding size mismatch");
    TokenNodes out;
    Tape::NodeId x = tape.gather_concat(binding.param_ids[0], context);
    out.activations.push_back(x);
    size_t idx = 1;
    Tape::NodeId h = x;
    for (size_t l = 0; l < dims_.hidden.size(); ++l) {
        h = tape.tanh(tape.add(tape.matvec(binding.param_ids[idx], h), binding.param_ids[idx + 1]));
        out.activations.push_back(h);
        idx += 2;
    }
    out.logits = tape.add(tape.matvec(binding.param_ids[idx], h), binding.param_ids[idx + 1]);
    out.activations.push_back(out.logits);
    out.logp = tape.log_prob(out.logits, token);
    return out;
}

void PolicyNet::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    write_pod(out, kCheckpointMagic);
    write_pod(out, kCheckpointVersion);
    write_pod(out, seed_);
    write_pod(out, static_cast<int32_t>(dims_.vocab));
    write_pod(out, static_cast<int32_t>(dims_.embed));
    write_pod(out, static_cast<int32_t>(dims_.context));
    write_pod(out, static_cast<int32_t>(dims_.hidden.size()));
    for (int h : dims_.hidden) write_pod(out, static_cast<int32_t>(h));
    for (const Tensor& p : params_) {
        write_pod(out, static_cast<int32_t>(p.rows()));
        write_pod(out, static_cast<int32_t>(p.cols()));
        out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

PolicyNet PolicyNet::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
    if (read_pod<uint32_t>(in) != kCheckpointMagic) throw std::runtime_error("checkpoint: bad magic");
    if (read_pod<uint32_t>(in) != kCheckpointVersion) throw std::runtime_error("checkpoint: unknown version");
    PolicyNet net;
    net.seed_ = read_pod<uint64_t>(in);
    net.dims_.vocab = read_pod<int32_t>(in);
    net.dims_.embed = read_pod<int32_t>(in);
    net.dims_.context = read_pod<int32_t>(in);
    const int n_hidden = read_pod<int32_t>(in);
    if (n_hidden < 1 || n_hidden > 64) throw std::runtime_error("checkpoint: implausible layer count");
    net.dims_.hidden.resize(static_cast<size_t>(n_hidden));
    for (int& h : net.dims_.hidden) h = read_pod<int32_t>(in);
    net.check_dims();
    const size_t n_params = 1 + 2 * net.dims_.hidden.size() + 2;
    for (size_t i = 0; i < n_params; ++i) {
        const int rows = read_pod<int32_t>(in);
        const int cols = read_pod<int32_t>(in);
        if (rows < 1 || cols < 1 || rows > 100000 || cols > 100000)
            throw std::runtime_error("checkpoint: implausible tensor shape");
        Tensor p(rows, cols);
        in.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint: truncated tensor data");
        net.params_.push_back(std::move(p));
    }
    const PolicyNet shape_check = PolicyNet::zeros(net.dims_);
    for (size_t i = 0; i < n_params; ++i)
        if (!net.params_[i].same_shape(shape_check.params()[i]))
            throw std::runtime_error("checkpoint: tensor shape inconsistent with dimensions");
    return net;
}

Response sample_response(const PolicyNet& net, std::span<const int> prompt, int max_len, double temperature,
                         Rng& rng, bool greedy, int eos_id) {
    if (max_len < 1) throw std::invalid_argument("sample_response: max_len must be >= 1");
    Response resp;
    resp.prompt.assign(prompt.begin(), prompt.end());
    std::vector<int> prefix(prompt.begin(), prompt.end());
    for (int t = 0; t < max_len; ++t) {
        const std::vector<int> ctx = net.context_of(prefix);
        const Tensor logits = net.forward_logits(ctx);
        int token;
        if (greedy) {
            token = 0;
            for (int i = 1; i < logits.size(); ++i)
                if (logits[i] > logits[token]) token = i;
        } else {
            token = rng.categorical(kernels::softmax(logits, temperature));
        }
        TokenRecord rec;
        rec.context = ctx;
        rec.token = token;
        rec.position = t;
        rec.logp_old = kernels::log_prob(logits, token);
        rec.old_prob = std::exp(rec.logp_old);
        rec.logp_ref = rec.logp_old;
        rec.ref_prob = rec.old_prob;
        resp.output.push_back(token);
        resp.records.push_back(std::move(rec));
        prefix.push_back(token);
        if (token == eos_id) {
            resp.eos_terminated = true;
            break;
        }
    }
    return resp;
}

Tape::NodeId log_prob_node(const PolicyNet& net, Tape& tape, const PolicyNet::TapeBinding& binding,
                           const TokenRecord& record) {
    return net.forward_on_tape(tape, binding, record.context, record.token).logp;
}

}  // namespace tokenlab
