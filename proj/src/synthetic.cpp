#include "bond/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "bond/tagger.hpp"

namespace bond {

namespace {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    bool chance(double p) { return uniform() < p; }
    std::size_t below(std::size_t n) {
        const std::uint64_t bound = n;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t r;
        do {
            r = gen_();
        } while (r >= limit);
        return static_cast<std::size_t>(r % bound);
    }
    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[below(v.size())];
    }

private:
    std::mt19937_64 gen_;
};

class Zipf {
public:
    Zipf(std::size_t n, double s) : cdf_(n) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += 1.0 / std::pow(double(i + 1), s);
            cdf_[i] = acc;
        }
        for (auto& c : cdf_) c /= acc;
    }
    std::size_t sample(Rng& rng) const {
        const double u = rng.uniform();
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    }

private:
    std::vector<double> cdf_;
};

using Words = std::vector<std::string>;

struct Cue {
    Words before;
    Words after;
};

const std::vector<std::string> kTypes = {"PER", "LOC", "ORG", "MISC"};

const std::vector<std::vector<Cue>>& cues() {
    static const std::vector<std::vector<Cue>> c = {
        {  // PER
         {{}, {"said"}},
         {{"Mr."}, {"said"}},
         {{"coach"}, {"was"}},
         {{"striker"}, {"scored"}},
         {{"according", "to"}, {","}},
         {{"minister"}, {"told", "reporters"}},
         {{}, {",", "who", "scored"}},
         {{"captain"}, {"led"}}},
        {  // LOC
         {{"in"}, {","}},
         {{"flew", "to"}, {}},
         {{"based", "in"}, {}},
         {{"near"}, {"on"}},
         {{"the", "city", "of"}, {}},
         {{"from"}, {"to"}},
         {{"visited"}, {"last", "week"}}},
        {  // ORG
         {{"shares", "of"}, {"rose"}},
         {{}, {"announced", "profits"}},
         {{"signed", "with"}, {}},
         {{"a", "spokesman", "for"}, {}},
         {{"played", "for"}, {}},
         {{}, {"said", "in", "a", "statement"}},
         {{"analysts", "at"}, {"said"}}},
        {  // MISC
         {{"the"}, {"team"}},
         {{"a"}, {"official"}},
         {{"the"}, {"government", "said"}},
         {{"the"}, {"cup", "final"}},
         {{}, {"championship"}},
         {{"the"}, {"language"}}},
    };
    return c;
}

const Words kFunctionWords = {"the", "of", "and", "a", "to", "was", "has", "after", "with", "on", "for",
                              "but", "while", "it", "that", "by", "at", "is", "may", "will", "also",
                              "last", "new", "two", "three", "over", "more", "than", "about", "its"};

const Words kOpeners = {"Meanwhile", "However", "Earlier", "Later", "Officials", "Sources"};

std::string capitalize(std::string w) {
    if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
}

std::string syllables(Rng& rng, std::size_t count) {
    static const Words onset = {"b", "d", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr", "ch", "sh"};
    static const Words vowel = {"a", "e", "i", "o", "u", "ai", "ou", "ei"};
    std::string w;
    for (std::size_t i = 0; i < count; ++i) w += rng.pick(onset) + rng.pick(vowel);
    if (rng.chance(0.5)) w += rng.pick(Words{"n", "r", "s", "l", "k", "th"});
    return w;
}

/// Unique words of the given shape, never colliding with `taken`.
std::string fresh_word(Rng& rng, std::set<std::string>& taken, std::size_t min_syl, std::size_t max_syl,
                       const std::string& suffix = {}) {
    for (;;) {
        auto w = syllables(rng, min_syl + rng.below(max_syl - min_syl + 1)) + suffix;
        if (taken.insert(w).second) return w;
    }
}

std::vector<Words> make_names(std::size_t type, std::size_t count, Rng& rng, std::set<std::string>& taken) {
    std::vector<Words> names;
    std::set<std::string> whole;
    while (names.size() < count) {
        Words n;
        switch (type) {
            case 0:  // PER: "First Last" or a bare surname
                if (rng.chance(0.6)) n.push_back(capitalize(fresh_word(rng, taken, 2, 2)));
                n.push_back(capitalize(fresh_word(rng, taken, 2, 3)));
                break;
            case 1:  // LOC
                if (rng.chance(0.15)) n.push_back("Port");
                n.push_back(capitalize(fresh_word(rng, taken, 2, 3)));
                break;
            case 2:  // ORG
                n.push_back(capitalize(fresh_word(rng, taken, 1, 3)));
                if (rng.chance(0.25)) n.push_back(capitalize(fresh_word(rng, taken, 2, 2)));
                if (rng.chance(0.2)) n.push_back(rng.chance(0.5) ? "Inc." : "Corp.");
                break;
            default:  // MISC: nationality-like adjectives
                n.push_back(capitalize(fresh_word(rng, taken, 1, 2, rng.chance(0.5) ? "ian" : "ese")));
                break;
        }
        std::string key;
        for (const auto& w : n) key += fold_case(w) + " ";
        if (whole.insert(key).second) names.push_back(std::move(n));
    }
    return names;
}

std::string join(const Words& w) {
    std::string out;
    for (const auto& s : w) {
        if (!out.empty()) out += ' ';
        out += s;
    }
    return out;
}

struct World {
    std::vector<std::vector<Words>> names;  // per type, Zipf-ranked
    Words filler;
    std::vector<Zipf> zipf;
};

void add_sentence(Corpus& corpus, const World& world, const SyntheticConfig& config, Rng& rng, std::size_t id) {
    Sentence s;
    s.doc_id = "synthetic" + std::to_string(id);
    std::vector<EntitySpan> spans;
    auto push = [&](const std::string& w) { s.tokens.push_back(Token{w, s.tokens.size()}); };
    auto push_all = [&](const Words& ws) {
        for (const auto& w : ws) push(w);
    };

    if (rng.chance(0.3)) {
        push(rng.pick(kOpeners));
        push(",");
    }
    const std::size_t clauses = 1 + rng.below(3);
    for (std::size_t c = 0; c < clauses; ++c) {
        if (c > 0) push(rng.chance(0.5) ? "and" : ",");
        const std::size_t filler = rng.below(3);
        for (std::size_t f = 0; f < filler; ++f) push(rng.pick(world.filler));
        if (rng.chance(0.15)) continue;  // entity-free clause

        const double u = rng.uniform();
        const std::size_t type = u < 0.3 ? 0 : u < 0.6 ? 1 : u < 0.85 ? 2 : 3;
        std::size_t cue_type = type;
        if (rng.chance(config.context_noise)) cue_type = (type + 1 + rng.below(kTypes.size() - 1)) % kTypes.size();
        const auto& cue = rng.pick(cues()[cue_type]);
        const auto& name = world.names[type][world.zipf[type].sample(rng)];

        push_all(cue.before);
        const std::size_t start = s.tokens.size();
        push_all(name);
        spans.push_back({start, s.tokens.size() - 1, type});
        push_all(cue.after);
    }
    if (s.tokens.empty()) push(rng.pick(world.filler));
    push(".");
    s.tokens[0].text = capitalize(s.tokens[0].text);
    auto labels = labels_from_spans(spans, s.size(), corpus.schema());
    corpus.add_labeled(std::move(s), LabelLayer::Gold, std::move(labels));
}

}  // namespace

SyntheticData make_synthetic(const SyntheticConfig& config) {
    Rng rng(config.seed);
    SyntheticData data;
    data.schema = LabelSchema(kTypes);

    World world;
    std::set<std::string> taken(kFunctionWords.begin(), kFunctionWords.end());
    for (const auto& per_type : cues()) {
        for (const auto& cue : per_type) {
            for (const auto& w : cue.before) taken.insert(fold_case(w));
            for (const auto& w : cue.after) taken.insert(fold_case(w));
        }
    }
    for (const auto& w : kOpeners) taken.insert(fold_case(w));
    taken.insert("port");
    taken.insert("inc.");
    taken.insert("corp.");
    world.filler = kFunctionWords;
    for (std::size_t i = 0; i < config.filler_words; ++i) world.filler.push_back(fresh_word(rng, taken, 1, 3));
    for (std::size_t t = 0; t < kTypes.size(); ++t) {
        world.names.push_back(make_names(t, config.names_per_type, rng, taken));
        world.zipf.emplace_back(config.names_per_type, config.zipf_exponent);
    }

    data.train = Corpus(data.schema);
    data.dev = Corpus(data.schema);
    data.test = Corpus(data.schema);
    std::size_t id = 0;
    for (std::size_t i = 0; i < config.train_sentences; ++i) add_sentence(data.train, world, config, rng, id++);
    for (std::size_t i = 0; i < config.dev_sentences; ++i) add_sentence(data.dev, world, config, rng, id++);
    for (std::size_t i = 0; i < config.test_sentences; ++i) add_sentence(data.test, world, config, rng, id++);

    // One gazetteer per type, the way separately crawled lists would arrive.
    std::vector<Gazetteer> gaz(kTypes.size());
    for (std::size_t t = 0; t < kTypes.size(); ++t) {
        gaz[t].source_name = "synthetic-" + kTypes[t];
        gaz[t].entries[kTypes[t]];
    }
    for (std::size_t t = 0; t < kTypes.size(); ++t) {
        const auto head = static_cast<std::size_t>(config.head_fraction * double(world.names[t].size()));
        for (std::size_t rank = 0; rank < world.names[t].size(); ++rank) {
            const auto phrase = join(world.names[t][rank]);
            bool listed = rng.chance(rank < head ? config.head_coverage : config.tail_coverage);
            if (rng.chance(config.wrong_type_rate)) {
                const auto other = (t + 1 + rng.below(kTypes.size() - 1)) % kTypes.size();
                gaz[other].add(kTypes[other], phrase);
                listed = listed && rng.chance(config.ambiguous_share);
            }
            if (listed) gaz[t].add(kTypes[t], phrase);
        }
    }
    for (std::size_t j = 0; j < config.junk_entries; ++j) {
        const auto t = rng.below(kTypes.size());
        gaz[t].add(kTypes[t], world.filler[kFunctionWords.size() + rng.below(world.filler.size() - kFunctionWords.size())]);
    }
    data.gazetteers = std::move(gaz);
    data.rules = {
        {"Inc.", 2, StampPosition::Tail},
        {"Corp.", 2, StampPosition::Tail},
        {"Port", 1, StampPosition::Head},
    };
    return data;
}

void write_synthetic(const SyntheticData& data, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "gazetteers");
    write_conll_file((fs::path(dir) / "train.conll").string(), data.train, LabelLayer::Gold);
    write_conll_file((fs::path(dir) / "dev.conll").string(), data.dev, LabelLayer::Gold);
    write_conll_file((fs::path(dir) / "test.conll").string(), data.test, LabelLayer::Gold);
    for (const auto& g : data.gazetteers) {
        for (const auto& [type, phrases] : g.entries) {
            std::ofstream out(fs::path(dir) / "gazetteers" / (type + ".txt"), std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot write gazetteer for " + type);
            for (const auto& p : phrases) out << join(p) << '\n';
        }
    }
    std::ofstream rules(fs::path(dir) / "stamps.tsv", std::ios::binary);
    if (!rules) throw IoError("cannot write stamps.tsv");
    rules << "# stamp\ttype\tposition\n";
    for (const auto& r : data.rules) {
        rules << r.stamp << '\t' << data.schema.entity_types()[r.type] << '\t'
              << (r.position == StampPosition::Head ? "head" : "tail") << '\n';
    }
}

}  // namespace bond
