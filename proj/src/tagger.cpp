#include "bond/tagger.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>

#include "bond/parallel.hpp"

namespace bond {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= kFnvPrime;
    }
    return h;
}

// splitmix64 finalizer spreads FNV output over the low bits used for masking.
std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

constexpr char kMagic[8] = {'B', 'O', 'N', 'D', 'M', 'D', 'L', '1'};

}  // namespace

std::uint64_t FeatureConfig::digest() const noexcept {
    std::uint64_t h = fnv1a("bond-features-v1");
    h = mix(h, static_cast<std::uint64_t>(window));
    h = mix(h, hash_bits);
    h = mix(h, hash_seed);
    return h;
}

std::string word_shape(const std::string& token) {
    std::string shape(token.size(), ' ');
    for (std::size_t i = 0; i < token.size(); ++i) {
        const auto c = static_cast<unsigned char>(token[i]);
        if (c >= 0x80) shape[i] = 'u';
        else if (c >= 'A' && c <= 'Z') shape[i] = 'X';
        else if (c >= 'a' && c <= 'z') shape[i] = 'x';
        else if (c >= '0' && c <= '9') shape[i] = 'd';
        else shape[i] = static_cast<char>(c);
    }
    return shape;
}

std::string fold_case(const std::string& token) {
    std::string out(token);
    for (auto& ch : out) {
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    }
    return out;
}

SentenceFeatures featurize(const Sentence& sentence, const FeatureConfig& config) {
    const auto n = static_cast<long>(sentence.size());
    const std::uint64_t mask = config.dim() - 1;
    const std::uint64_t base = mix(kFnvOffset, config.hash_seed);
    std::vector<std::string> folded(sentence.size());
    std::vector<std::string> shapes(sentence.size());
    for (std::size_t i = 0; i < sentence.size(); ++i) {
        folded[i] = fold_case(sentence.text(i));
        shapes[i] = word_shape(sentence.text(i));
    }

    SentenceFeatures out(sentence.size());
    std::vector<std::uint32_t> idx;
    std::string key;
    for (long i = 0; i < n; ++i) {
        idx.clear();
        auto emit = [&](std::string_view family, int offset, std::string_view value) {
            key.assign(family);
            key += std::to_string(offset);
            key += '=';
            key += value;
            idx.push_back(static_cast<std::uint32_t>(finalize(fnv1a(key, base)) & mask));
        };
        for (int off = -config.window; off <= config.window; ++off) {
            const long j = i + off;
            if (j < 0) {
                emit("w", off, "<BOS>");
                continue;
            }
            if (j >= n) {
                emit("w", off, "<EOS>");
                continue;
            }
            const auto& word = folded[static_cast<std::size_t>(j)];
            emit("w", off, word);
            emit("shape", off, shapes[static_cast<std::size_t>(j)]);
            for (std::size_t k = 1; k <= 3 && k <= word.size(); ++k) {
                emit("pre", off, std::string_view(word).substr(0, k));
                emit("suf", off, std::string_view(word).substr(word.size() - k));
            }
        }
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        auto& fv = out[static_cast<std::size_t>(i)];
        fv.reserve(idx.size());
        for (auto k : idx) fv.push_back(Feature{k, 1.0});
    }
    return out;
}

std::vector<SentenceFeatures> featurize(const Corpus& corpus, const FeatureConfig& config) {
    std::vector<SentenceFeatures> out(corpus.size());
    parallel_for(corpus.size(), [&](std::size_t i) { out[i] = featurize(corpus.sentence(i), config); });
    return out;
}

ProbMatrix ProbMatrix::one_hot(const LabelSequence& labels, std::size_t num_classes) {
    ProbMatrix m(labels.size(), num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
            throw Error("label index out of range for one-hot encoding");
        }
        m(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    return m;
}

ModelParams init_params(std::size_t dim, std::size_t num_classes, std::uint64_t seed) {
    if (dim == 0 || num_classes == 0) throw Error("model dimensions must be positive");
    ModelParams p;
    p.dim = dim;
    p.num_classes = num_classes;
    p.seed = seed;
    p.weights.resize(dim * num_classes);
    std::mt19937_64 rng(seed);
    for (auto& w : p.weights) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
        w = -0.01 + 0.02 * u;
    }
    p.initial = std::make_shared<const std::vector<double>>(p.weights);
    return p;
}

void check_finite(const ModelParams& params) {
    for (double w : params.weights) {
        if (!std::isfinite(w)) throw NumericalError("non-finite model parameter");
    }
}

namespace {

// Softmax of the token's logits into `probs`.
void token_probs(const ModelParams& params, const FeatureVector& fv, std::span<double> probs) {
    const std::size_t c = params.num_classes;
    std::fill(probs.begin(), probs.end(), 0.0);
    for (const auto& f : fv) {
        if (f.index >= params.dim) throw Error("feature index out of range");
        const double* w = params.weights.data() + std::size_t{f.index} * c;
        for (std::size_t k = 0; k < c; ++k) probs[k] += f.value * w[k];
    }
    double mx = probs[0];
    for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, probs[k]);
    if (!std::isfinite(mx)) throw NumericalError("non-finite logit; model parameters are not finite");
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
        probs[k] = std::exp(probs[k] - mx);
        z += probs[k];
    }
    for (std::size_t k = 0; k < c; ++k) probs[k] /= z;
}

}  // namespace

ProbMatrix forward(const ModelParams& params, const SentenceFeatures& features) {
    ProbMatrix out(features.size(), params.num_classes);
    for (std::size_t i = 0; i < features.size(); ++i) token_probs(params, features[i], out.row(i));
    return out;
}

PredictionBatch predict(const ModelParams& params, const std::vector<SentenceFeatures>& features) {
    PredictionBatch out(features.size());
    parallel_for(features.size(), [&](std::size_t i) { out[i] = forward(params, features[i]); });
    return out;
}

std::vector<LabelSequence> decode(const PredictionBatch& preds, const LabelSchema& schema) {
    std::vector<LabelSequence> out;
    out.reserve(preds.size());
    for (const auto& m : preds) {
        LabelSequence labels(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            auto r = m.row(i);
            labels[i] = static_cast<LabelId>(std::max_element(r.begin(), r.end()) - r.begin());
        }
        out.push_back(repair_bio(labels, schema));
    }
    return out;
}

LossAndGradient grad_loss(const ModelParams& params, std::span<const TrainingExample> batch) {
    LossAndGradient out;
    grad_loss(params, batch, out);
    return out;
}

void grad_loss(const ModelParams& params, std::span<const TrainingExample> batch, LossAndGradient& out) {
    const std::size_t c = params.num_classes;
    out.gradient.assign(params.weights.size(), 0.0);
    out.loss = 0.0;
    out.active_tokens = 0;
    out.clamped = false;

    for (const auto& ex : batch) {
        if (ex.target->rows() != ex.features->size() || ex.target->cols() != c) {
            throw Error("target shape does not match the batch");
        }
        if (ex.mask && ex.mask->size() != ex.features->size()) throw Error("mask does not align with tokens");
        for (std::size_t i = 0; i < ex.features->size(); ++i) {
            if (!ex.mask || (*ex.mask)[i]) ++out.active_tokens;
        }
    }
    if (out.active_tokens == 0) return;

    const double scale = 1.0 / static_cast<double>(out.active_tokens);
    std::vector<double> probs(c);
    std::vector<double> delta(c);
    for (const auto& ex : batch) {
        const auto& feats = *ex.features;
        for (std::size_t i = 0; i < feats.size(); ++i) {
            if (ex.mask && !(*ex.mask)[i]) continue;
            token_probs(params, feats[i], probs);
            auto target = ex.target->row(i);
            double mass = 0.0;
            for (std::size_t k = 0; k < c; ++k) {
                if (!(target[k] >= 0.0)) throw Error("target distribution has a negative or NaN entry");
                mass += target[k];
            }
            if (std::abs(mass - 1.0) > 1e-6) throw Error("target distribution does not sum to 1");
            double loss = 0.0;
            for (std::size_t k = 0; k < c; ++k) {
                if (target[k] > 0.0) {
                    if (probs[k] < kLogClamp) out.clamped = true;
                    loss -= target[k] * std::log(std::max(probs[k], kLogClamp));
                }
                delta[k] = (probs[k] - target[k]) * scale;
            }
            out.loss += loss;
            for (const auto& f : feats[i]) {
                double* g = out.gradient.data() + std::size_t{f.index} * c;
                for (std::size_t k = 0; k < c; ++k) g[k] += f.value * delta[k];
            }
        }
    }
    out.loss *= scale;
    if (!std::isfinite(out.loss)) throw NumericalError("non-finite loss");
}

void write_checkpoint(std::ostream& out, const ModelParams& params) {
    out.write(kMagic, sizeof kMagic);
    put_u64(out, params.dim);
    put_u64(out, params.num_classes);
    put_u64(out, params.seed);
    put_u64(out, params.feature_digest);
    for (double w : params.weights) put_u64(out, std::bit_cast<std::uint64_t>(w));
    if (!out) throw IoError("checkpoint write failed");
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_checkpoint(out, params);
}

ModelParams read_checkpoint(std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMagic)) throw IoError("not a model checkpoint");
    const auto dim = get_u64(in);
    const auto classes = get_u64(in);
    const auto seed = get_u64(in);
    const auto digest = get_u64(in);
    if (dim == 0 || classes == 0 || dim > (std::uint64_t{1} << 32) || classes > 4096) {
        throw IoError("implausible checkpoint shape");
    }
    ModelParams p = init_params(dim, classes, seed);
    p.feature_digest = digest;
    for (auto& w : p.weights) w = std::bit_cast<double>(get_u64(in));
    check_finite(p);
    return p;
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_checkpoint(in);
}

}  // namespace bond
