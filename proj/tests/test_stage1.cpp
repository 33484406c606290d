#include <doctest.h>

#include "bond/stage1.hpp"
#include "support.hpp"

using namespace bond;

namespace {

// "zork" is always a PER, everything else O: separable from identity alone.
Corpus separable() {
    const LabelSchema schema({"PER"});
    Corpus c(schema);
    const char* texts[] = {"zork said hi", "we met zork", "nobody came", "zork and zork left", "the end"};
    for (const char* t : texts) {
        auto s = Sentence::from_text(t);
        LabelSequence l(s.size(), 0);
        for (std::size_t i = 0; i < s.size(); ++i) l[i] = s.text(i) == "zork" ? 1 : 0;
        c.add_labeled(std::move(s), LabelLayer::Distant, std::move(l));
    }
    return c;
}

struct Fixture {
    Corpus corpus = separable();
    FeatureConfig fc = [] {
        FeatureConfig f;
        f.hash_bits = 10;
        return f;
    }();
    std::vector<SentenceFeatures> feats = featurize(corpus, fc);
    ModelParams init = init_params(fc.dim(), corpus.schema().num_labels(), 5);
};

Stage1Config config(std::uint64_t steps) {
    Stage1Config c;
    c.steps = steps;
    c.batch_size = 2;
    c.seed = 3;
    c.lr.base = 0.05;
    return c;
}

}  // namespace

TEST_CASE("T1 = 0 returns the input parameters") {
    Fixture f;
    const auto r = train_stage1(f.corpus, f.feats, f.init, config(0));
    CHECK(r.params.weights == f.init.weights);
    CHECK(r.optimizer_steps == 0);
    CHECK(r.log.empty());
}

TEST_CASE("Stage I performs exactly T1 updates and is deterministic") {
    Fixture f;
    const auto a = train_stage1(f.corpus, f.feats, f.init, config(37));
    const auto b = train_stage1(f.corpus, f.feats, f.init, config(37));
    CHECK(a.optimizer_steps == 37);
    CHECK(a.params.version - f.init.version == 37);
    CHECK(a.log.size() == 37);
    CHECK(a.params.weights == b.params.weights);
    CHECK(stage1_log_csv(a.log) == stage1_log_csv(b.log));
}

TEST_CASE("Stage I with fewer steps is a prefix of a longer run") {
    Fixture f;
    std::vector<double> at20;
    const auto longer = train_stage1(f.corpus, f.feats, f.init, config(60), nullptr,
                                     [&](std::uint64_t step, const ModelParams& p) {
                                         if (step == 20) at20 = p.weights;
                                     });
    const auto shorter = train_stage1(f.corpus, f.feats, f.init, config(20));
    CHECK(shorter.params.weights == at20);
    for (std::size_t i = 0; i < 20; ++i) CHECK(shorter.log[i].loss == longer.log[i].loss);
}

TEST_CASE("Stage I lowers the training loss on separable data") {
    Fixture f;
    const auto r = train_stage1(f.corpus, f.feats, f.init, config(200));
    std::vector<LabelSequence> labels = f.corpus.layer(LabelLayer::Distant);
    const double before = cross_entropy_loss(predict(f.init, f.feats), labels).value;
    const double after = cross_entropy_loss(predict(r.params, f.feats), labels).value;
    CHECK(after < before);
    CHECK(decode(predict(r.params, f.feats), f.corpus.schema()) == labels);
}

TEST_CASE("dev F1 is logged on the interval but does not steer training") {
    Fixture f;
    Corpus dev(f.corpus.schema());
    dev.add_labeled(Sentence::from_text("zork ran"), LabelLayer::Gold, {1, 0});
    const auto dev_feats = featurize(dev, f.fc);
    DevSet ds{&dev_feats, &dev.layer(LabelLayer::Gold), &dev.schema()};
    auto cfg = config(30);
    cfg.dev_interval = 10;
    const auto with = train_stage1(f.corpus, f.feats, f.init, cfg, &ds);
    const auto without = train_stage1(f.corpus, f.feats, f.init, config(30));
    CHECK(with.params.weights == without.params.weights);
    std::size_t logged = 0;
    for (const auto& row : with.log) logged += row.dev_f1.has_value();
    CHECK(logged == 3);
    const auto csv = stage1_log_csv(with.log);
    CHECK(csv.rfind("step,lr,loss,dev_f1\n", 0) == 0);
}

TEST_CASE("Stage I needs a distant layer") {
    Fixture f;
    Corpus bare(f.corpus.schema());
    bare.add_sentence(Sentence::from_text("zork"));
    CHECK_THROWS(train_stage1(bare, featurize(bare, f.fc), f.init, config(1)));
}
