// SPDX-License-Identifier: Apache-2.0
#include "ghr/toy.hpp"

#include <chrono>
#include <random>

#include "ghr/question.hpp"

namespace ghr {

ToySample make_toy_sample(std::uint64_t seed) {
    Vocabulary vocab({"person", "cup", "book", "towel"}, {"holding", "touching"}, {"person"});
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(0.0, 0.5);
    auto box = [&] { return BBox{coord(rng), coord(rng), 0.1 + coord(rng), 0.1 + coord(rng)}; };

    FrameSceneGraph f0;
    f0.frame_id = "f0";
    f0.nodes = {{0, 0, box()}, {1, 1, box()}, {2, 2, box()}};
    f0.edges = {{0, 0, 1}, {1, 1, 2}};
    FrameSceneGraph f1;
    f1.frame_id = "f1";
    f1.nodes = {{4, 2, box()}, {7, 0, box()}, {5, 3, box()}};
    f1.edges = {{7, 1, 4}};  // node 5 stays isolated

    ToySample s{vocab, build_video_graph("toy", {f0, f1}, vocab, NoHumanPolicy::Skip), {}, {}, 0};
    ModelConfig& c = s.config;
    c.sgem.d_node = 4;
    c.sgem.d_edge = 3;
    c.sgem.heads = 2;
    c.sgem.d_head = 2;
    c.sgem.n_layers = 2;
    c.crn.d = 4;
    c.crn.k_max = 2;
    c.crn.subsets = 2;
    c.crn.clip_length = 2;
    c.d_q = 8;
    c.head_hidden = 4;
    c.num_answers = 3;
    s.question = tensor_cast<double>(toy_embed("what is the person holding?", c.d_q).vector);
    s.answer = static_cast<std::size_t>(seed % c.num_answers);
    return s;
}

ToyGradCheck toy_grad_check(std::uint64_t seed, const GradCheckOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const ToySample s = make_toy_sample(seed);
    ParamStore<double> params = init_model_params(s.config, s.vocab, seed).cast<double>();
    const PreparedVideo video = prepare_video(s.graph, s.config, s.vocab);
    const ModelWeights<double> w = bind_model(params, s.config, s.vocab.num_predicates());
    auto loss = [&] {
        return softmax_cross_entropy(model_logits(w, s.config, video, s.question, seed), {s.answer});
    };
    ToyGradCheck out;
    out.report = grad_check(loss, params, options);
    out.parameters = params.size();
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace ghr
