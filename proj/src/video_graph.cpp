// SPDX-License-Identifier: Apache-2.0
#include "ghr/video_graph.hpp"

#include <deque>

#include "ghr/binary_io.hpp"
#include "ghr/error.hpp"

namespace ghr {

VideoGraph::VideoGraph(std::string video_id, std::vector<FrameSceneGraph> frames,
                       std::vector<HumanRoot> human_roots, std::size_t skipped_frames)
    : video_id_(std::move(video_id)),
      frames_(std::move(frames)),
      roots_(std::move(human_roots)),
      skipped_(skipped_frames) {
    if (frames_.empty()) {
        throw Error(ErrorCode::AllFramesSkipped, "video \"" + video_id_ + "\" has no frames");
    }
    if (roots_.size() != frames_.size()) {
        throw Error(ErrorCode::InvalidArgument, "one human root per frame required");
    }
    offsets_.reserve(frames_.size() + 1);
    for (std::size_t f = 0; f < frames_.size(); ++f) {
        const auto& g = frames_[f];
        const std::size_t base = nodes_.size();
        offsets_.push_back(base);
        for (const auto& n : g.nodes) {
            nodes_.push_back(FlatNode{FlatNodeKind::Entity, f, n.class_index, n.bbox, n.node_id});
        }
        for (const auto& e : g.edges) {
            edges_.push_back(FlatEdge{base + static_cast<std::size_t>(g.position_of(e.subject_id)),
                                      base + static_cast<std::size_t>(g.position_of(e.object_id)),
                                      EdgeLabel{e.predicate_index}});
        }
        if (roots_[f].node_id) {
            const int pos = g.position_of(*roots_[f].node_id);
            if (pos < 0) {
                throw Error(ErrorCode::UnknownNode, "human root not in frame \"" + g.frame_id + "\"");
            }
            human_flat_.push_back(base + static_cast<std::size_t>(pos));
        } else {
            human_flat_.push_back(nodes_.size());
            nodes_.push_back(FlatNode{FlatNodeKind::SyntheticHuman, f, 0, BBox{}, -1});
        }
    }
    offsets_.push_back(nodes_.size());
    const std::size_t root = nodes_.size();
    nodes_.push_back(FlatNode{FlatNodeKind::GlobalRoot, 0, 0, BBox{}, -1});
    for (std::size_t f = 0; f < frames_.size(); ++f) {
        edges_.push_back(FlatEdge{human_flat_[f], root, EdgeLabel{}});
    }
}

std::size_t VideoGraph::flat_index(std::size_t frame, int node_id) const {
    if (frame >= frames_.size()) {
        throw Error(ErrorCode::UnknownNode, "frame index " + std::to_string(frame));
    }
    const int pos = frames_[frame].position_of(node_id);
    if (pos < 0) {
        throw Error(ErrorCode::UnknownNode, "node " + std::to_string(node_id) + " in frame " +
                                                std::to_string(frame));
    }
    return offsets_[frame] + static_cast<std::size_t>(pos);
}

std::vector<std::pair<std::size_t, std::size_t>> VideoGraph::root_edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(frames_.size());
    for (std::size_t f = 0; f < frames_.size(); ++f) out.emplace_back(f, human_flat_[f]);
    return out;
}

std::optional<int> select_human_root(const FrameSceneGraph& g, const Vocabulary& vocab) {
    std::optional<int> best;
    double best_area = -1.0;
    for (const auto& n : g.nodes) {
        if (!vocab.is_human(n.class_index)) continue;
        const double area = n.bbox.area();
        if (!best || area > best_area || (area == best_area && n.node_id < *best)) {
            best = n.node_id;
            best_area = area;
        }
    }
    return best;
}

VideoGraph build_video_graph(std::string video_id, const std::vector<FrameSceneGraph>& frames,
                             const Vocabulary& vocab, NoHumanPolicy policy) {
    if (frames.empty()) {
        throw Error(ErrorCode::InvalidArgument, "video \"" + video_id + "\" has no frames");
    }
    std::vector<FrameSceneGraph> kept;
    std::vector<VideoGraph::HumanRoot> roots;
    std::size_t skipped = 0;
    for (const auto& g : frames) {
        auto human = select_human_root(g, vocab);
        if (!human && policy == NoHumanPolicy::Skip) {
            ++skipped;
            continue;
        }
        kept.push_back(g);
        roots.push_back(VideoGraph::HumanRoot{human});
    }
    if (kept.empty()) {
        throw Error(ErrorCode::AllFramesSkipped,
                    "video \"" + video_id + "\": no frame contains a human node");
    }
    return VideoGraph(std::move(video_id), std::move(kept), std::move(roots), skipped);
}

ClipPlan plan_clips(std::size_t num_frames, std::size_t clip_length) {
    if (clip_length == 0) {
        throw Error(ErrorCode::InvalidClipLength, "clip length must be at least 1");
    }
    if (num_frames == 0) {
        throw Error(ErrorCode::InvalidArgument, "no frames to plan");
    }
    ClipPlan plan;
    plan.clip_length = clip_length;
    for (std::size_t start = 0; start < num_frames; start += clip_length) {
        std::vector<std::size_t> window;
        window.reserve(clip_length);
        for (std::size_t i = 0; i < clip_length; ++i) {
            window.push_back(std::min(start + i, num_frames - 1));
        }
        plan.clips.push_back(std::move(window));
    }
    return plan;
}

ClipPlan plan_clips(const VideoGraph& vg, std::size_t clip_length) {
    return plan_clips(vg.num_frames(), clip_length);
}

std::optional<std::size_t> bfs_distance(const VideoGraph& vg, std::size_t a, std::size_t b,
                                        std::optional<std::size_t> removed) {
    const std::size_t n = vg.num_nodes();
    if (a >= n || b >= n) {
        throw Error(ErrorCode::UnknownNode, "flat node index out of range");
    }
    if (removed && (*removed == a || *removed == b)) return std::nullopt;
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& e : vg.edges()) {
        adj[e.a].push_back(e.b);
        adj[e.b].push_back(e.a);
    }
    constexpr auto kUnseen = static_cast<std::size_t>(-1);
    std::vector<std::size_t> dist(n, kUnseen);
    std::deque<std::size_t> queue{a};
    dist[a] = 0;
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        if (u == b) return dist[u];
        for (std::size_t v : adj[u]) {
            if (dist[v] != kUnseen || (removed && v == *removed)) continue;
            dist[v] = dist[u] + 1;
            queue.push_back(v);
        }
    }
    return std::nullopt;
}

std::vector<FrameSceneGraph> parse_video_frames(const json& doc, const Vocabulary& vocab,
                                                std::string* video_id) {
    if (!doc.is_object() || !doc.contains("video_id") || !doc["video_id"].is_string() ||
        !doc.contains("frames") || !doc["frames"].is_array()) {
        throw Error(ErrorCode::MalformedDocument,
                    "video document needs \"video_id\" and a \"frames\" array");
    }
    if (video_id) *video_id = doc["video_id"].get<std::string>();
    std::vector<FrameSceneGraph> frames;
    frames.reserve(doc["frames"].size());
    for (const auto& f : doc["frames"]) frames.push_back(parse_frame_graph(f, vocab));
    return frames;
}

VideoGraph parse_video(const json& doc, const Vocabulary& vocab, NoHumanPolicy policy) {
    std::string id;
    auto frames = parse_video_frames(doc, vocab, &id);
    return build_video_graph(std::move(id), frames, vocab, policy);
}

namespace {

void write_strings(io::ByteWriter& w, const std::vector<std::string>& v) {
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (const auto& s : v) w.str16(s);
}

std::vector<std::string> read_strings(io::ByteReader& r) {
    const std::uint32_t n = r.u32();
    if (n > r.remaining() / 2) r.fail("string count exceeds file size");
    std::vector<std::string> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(r.str16());
    return out;
}

}  // namespace

void write_graph_cache(const std::filesystem::path& path, const VideoGraph& vg,
                       const Vocabulary& vocab) {
    io::ByteWriter w;
    w.magic("GHRG");
    w.u8(kGraphCacheVersion);
    write_strings(w, vocab.object_classes());
    write_strings(w, vocab.predicate_classes());
    write_strings(w, vocab.human_class_names());
    w.str16(vg.video_id());
    w.u32(static_cast<std::uint32_t>(vg.skipped_frames()));
    w.u32(static_cast<std::uint32_t>(vg.num_frames()));
    for (std::size_t f = 0; f < vg.num_frames(); ++f) {
        const auto& g = vg.frames()[f];
        w.str16(g.frame_id);
        const auto& root = vg.human_roots()[f];
        w.u8(root.node_id ? 1 : 0);
        w.i32(root.node_id.value_or(-1));
        w.u32(static_cast<std::uint32_t>(g.nodes.size()));
        for (const auto& n : g.nodes) {
            w.i32(n.node_id);
            w.u32(static_cast<std::uint32_t>(n.class_index));
            w.f64(n.bbox.x);
            w.f64(n.bbox.y);
            w.f64(n.bbox.w);
            w.f64(n.bbox.h);
        }
        w.u32(static_cast<std::uint32_t>(g.edges.size()));
        for (const auto& e : g.edges) {
            w.i32(e.subject_id);
            w.u32(static_cast<std::uint32_t>(e.predicate_index));
            w.i32(e.object_id);
        }
    }
    io::write_file_atomic(path, w.buffer());
}

GraphCache read_graph_cache(const std::filesystem::path& path) {
    io::ByteReader r(io::read_file(path), ErrorCode::MalformedFile, path.string());
    r.expect_magic("GHRG");
    const std::uint8_t version = r.u8();
    if (version != kGraphCacheVersion) {
        throw Error(ErrorCode::VersionMismatch,
                    path.string() + ": graph cache version " + std::to_string(version));
    }
    auto objects = read_strings(r);
    auto predicates = read_strings(r);
    auto humans = read_strings(r);
    Vocabulary vocab(std::move(objects), std::move(predicates), std::move(humans));
    std::string video_id = r.str16();
    const std::size_t skipped = r.u32();
    const std::uint32_t n_frames = r.u32();
    std::vector<FrameSceneGraph> frames;
    std::vector<VideoGraph::HumanRoot> roots;
    for (std::uint32_t f = 0; f < n_frames; ++f) {
        FrameSceneGraph g;
        g.frame_id = r.str16();
        const bool has_root = r.u8() != 0;
        const std::int32_t root_id = r.i32();
        roots.push_back(VideoGraph::HumanRoot{has_root ? std::optional<int>(root_id) : std::nullopt});
        const std::uint32_t n_nodes = r.u32();
        if (n_nodes > r.remaining() / 40) r.fail("node count exceeds file size");
        for (std::uint32_t i = 0; i < n_nodes; ++i) {
            EntityNode n;
            n.node_id = r.i32();
            n.class_index = r.u32();
            n.bbox.x = r.f64();
            n.bbox.y = r.f64();
            n.bbox.w = r.f64();
            n.bbox.h = r.f64();
            g.nodes.push_back(n);
        }
        const std::uint32_t n_edges = r.u32();
        if (n_edges > r.remaining() / 12) r.fail("edge count exceeds file size");
        for (std::uint32_t i = 0; i < n_edges; ++i) {
            RelationEdge e;
            e.subject_id = r.i32();
            e.predicate_index = r.u32();
            e.object_id = r.i32();
            g.edges.push_back(e);
        }
        validate_frame(g, vocab);
        frames.push_back(std::move(g));
    }
    if (r.remaining() != 0) r.fail("trailing bytes");
    VideoGraph vg(std::move(video_id), std::move(frames), std::move(roots), skipped);
    return GraphCache{std::move(vocab), std::move(vg)};
}

}  // namespace ghr
