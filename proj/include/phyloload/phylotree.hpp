#pragma once

// Rooted phylogenies: Newick and Nexus TREES input, Newick output, pruning to
// a taxon subset and the Brownian-motion covariance (shared path length)
// matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "phyloload/errors.hpp"
#include "phyloload/text.hpp"

namespace phyloload {

struct TreeNode {
  std::string label;
  double length = 0.0;  // length of the branch above this node
  bool has_length = false;
  int parent = -1;
  std::vector<int> children;

  bool is_tip() const { return children.empty(); }
};

// A rooted tree stored as a node array in preorder; node 0 is the root.
// Tips carry unique non-empty labels and every branch length is >= 0.
class Phylogeny {
 public:
  Phylogeny() = default;
  explicit Phylogeny(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    validate();
    depths_.assign(nodes_.size(), 0.0);
    for (std::size_t i = 1; i < nodes_.size(); ++i)
      depths_[i] = depths_[static_cast<std::size_t>(nodes_[i].parent)] + nodes_[i].length;
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  int root() const { return 0; }
  std::size_t num_nodes() const { return nodes_.size(); }

  // Tip node indices in preorder.
  std::vector<int> tips() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].is_tip()) out.push_back(static_cast<int>(i));
    return out;
  }

  std::vector<std::string> tip_labels() const {
    std::vector<std::string> out;
    for (int t : tips()) out.push_back(node(t).label);
    return out;
  }

  std::size_t num_tips() const { return tips().size(); }

  std::optional<int> find_tip(std::string_view label) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].is_tip() && nodes_[i].label == label) return static_cast<int>(i);
    return std::nullopt;
  }

  // Distance from the root node to each node; the root's own branch is not
  // counted. Fixed at construction; a pruned tree inherits its source's.
  const std::vector<double>& depths() const { return depths_; }

  double height() const {
    auto d = depths();
    double h = 0.0;
    for (int t : tips()) h = std::max(h, d[static_cast<std::size_t>(t)]);
    return h;
  }

  friend bool operator==(const Phylogeny& a, const Phylogeny& b) {
    if (a.nodes_.size() != b.nodes_.size()) return false;
    for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
      const auto& x = a.nodes_[i];
      const auto& y = b.nodes_[i];
      if (x.label != y.label || x.has_length != y.has_length || x.parent != y.parent ||
          x.children != y.children)
        return false;
      if (x.has_length && std::bit_cast<std::uint64_t>(x.length) != std::bit_cast<std::uint64_t>(y.length))
        return false;
    }
    return true;
  }

 private:
  friend Phylogeny prune(const Phylogeny&, const std::set<std::string>&);

  Phylogeny(std::vector<TreeNode> nodes, std::vector<double> depths) : nodes_(std::move(nodes)) {
    validate();
    depths_ = std::move(depths);
  }

  void validate() const {
    if (nodes_.empty()) throw InputError("tree has no nodes");
    if (nodes_[0].parent != -1) throw InputError("tree root must be node 0");
    std::set<std::string> seen;
    std::size_t ntips = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (i > 0 && (n.parent < 0 || static_cast<std::size_t>(n.parent) >= i))
        throw InputError("tree nodes are not in preorder");
      if (!std::isfinite(n.length) || n.length < 0.0)
        throw InputError("negative or non-finite branch length at node '" + n.label + "'");
      if (n.is_tip()) {
        ++ntips;
        if (n.label.empty()) throw InputError("tree has an unlabeled tip");
        if (!seen.insert(n.label).second) throw InputError("duplicate tip label '" + n.label + "'");
      }
    }
    if (ntips < 2) throw InputError("tree must have at least 2 tips");
  }

  std::vector<TreeNode> nodes_;
  std::vector<double> depths_;
};

namespace detail {

class NewickParser {
 public:
  explicit NewickParser(std::string_view s) : s_(s) {}

  Phylogeny parse() {
    skip();
    if (at_end()) throw InputError("empty Newick string");
    parse_subtree(-1);
    skip();
    if (at_end() || s_[pos_] != ';') throw InputError("missing ';' at end of Newick tree" + at());
    ++pos_;
    skip();
    if (!at_end()) throw InputError("unexpected text after ';'" + at());
    return Phylogeny(std::move(nodes_));
  }

 private:
  bool at_end() const { return pos_ >= s_.size(); }
  std::string at() const { return " (at character " + std::to_string(pos_ + 1) + ")"; }

  // Skips whitespace and [bracketed comments].
  void skip() {
    while (!at_end()) {
      if (text::is_space(s_[pos_])) {
        ++pos_;
      } else if (s_[pos_] == '[') {
        auto close = s_.find(']', pos_);
        if (close == std::string_view::npos) throw InputError("unterminated comment in Newick" + at());
        pos_ = close + 1;
      } else {
        break;
      }
    }
  }

  int parse_subtree(int parent) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{});
    nodes_.back().parent = parent;
    if (parent >= 0) nodes_[static_cast<std::size_t>(parent)].children.push_back(id);
    skip();
    if (!at_end() && s_[pos_] == '(') {
      ++pos_;
      while (true) {
        parse_subtree(id);
        skip();
        if (at_end()) throw InputError("unbalanced parentheses in Newick");
        if (s_[pos_] == ',') {
          ++pos_;
          continue;
        }
        if (s_[pos_] == ')') {
          ++pos_;
          break;
        }
        throw InputError(std::string("unexpected '") + s_[pos_] + "' in Newick" + at());
      }
    }
    skip();
    nodes_[static_cast<std::size_t>(id)].label = parse_label();
    skip();
    if (!at_end() && s_[pos_] == ':') {
      ++pos_;
      skip();
      auto start = pos_;
      while (!at_end() && std::string_view("(),:;[").find(s_[pos_]) == std::string_view::npos && !text::is_space(s_[pos_])) ++pos_;
      auto len = text::parse_double(s_.substr(start, pos_ - start));
      if (!len) throw InputError("malformed branch length" + at());
      if (*len < 0.0) throw InputError("negative branch length " + text::format_double(*len));
      auto& n = nodes_[static_cast<std::size_t>(id)];
      n.length = *len;
      n.has_length = true;
    }
    return id;
  }

  std::string parse_label() {
    if (at_end()) return {};
    if (s_[pos_] == '\'') {
      std::string out;
      ++pos_;
      while (true) {
        if (at_end()) throw InputError("unterminated quoted label in Newick");
        char c = s_[pos_++];
        if (c == '\'') {
          if (!at_end() && s_[pos_] == '\'') {
            out += '\'';
            ++pos_;
          } else {
            break;
          }
        } else {
          out += c;
        }
      }
      return out;
    }
    auto start = pos_;
    while (!at_end() && std::string_view("(),:;[]'").find(s_[pos_]) == std::string_view::npos && !text::is_space(s_[pos_])) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::vector<TreeNode> nodes_;
};

inline std::string newick_label(const std::string& label) {
  if (label.find_first_of("()[]':;, \t\r\n") == std::string::npos) return label;
  std::string out = "'";
  for (char c : label) {
    if (c == '\'') out += '\'';
    out += c;
  }
  out += '\'';
  return out;
}

inline void write_newick(const Phylogeny& tree, int id, std::string& out) {
  const auto& n = tree.node(id);
  if (!n.is_tip()) {
    out += '(';
    for (std::size_t k = 0; k < n.children.size(); ++k) {
      if (k) out += ',';
      write_newick(tree, n.children[k], out);
    }
    out += ')';
  }
  out += newick_label(n.label);
  if (n.has_length) {
    out += ':';
    out += text::format_double(n.length);
  }
}

}  // namespace detail

inline Phylogeny parse_newick(std::string_view text) { return detail::NewickParser(text).parse(); }

inline std::string to_newick(const Phylogeny& tree) {
  std::string out;
  detail::write_newick(tree, tree.root(), out);
  out += ';';
  return out;
}

using TreeSample = std::vector<Phylogeny>;

namespace detail {

struct NexusStatement {
  std::string text;
  int line = 0;
};

// Splits Nexus text into ';'-terminated statements, respecting quotes and
// comments. The terminating ';' is not included.
inline std::vector<NexusStatement> nexus_statements(std::string_view s) {
  std::vector<NexusStatement> out;
  std::string cur;
  int line = 1, start_line = 1;
  bool in_quote = false;
  int comment_depth = 0;
  for (char c : s) {
    if (c == '\n') ++line;
    if (cur.empty() && text::is_space(c) && !in_quote) {
      start_line = line;
      continue;
    }
    if (comment_depth > 0) {
      if (c == '[') ++comment_depth;
      if (c == ']') --comment_depth;
      cur += c;
      continue;
    }
    if (in_quote) {
      if (c == '\'') in_quote = false;
      cur += c;
      continue;
    }
    if (c == '\'') in_quote = true;
    if (c == '[') ++comment_depth;
    if (c == ';') {
      out.push_back({cur, start_line});
      cur.clear();
      start_line = line;
      continue;
    }
    cur += c;
  }
  if (!text::trim(cur).empty()) out.push_back({cur, start_line});
  return out;
}

inline std::string strip_nexus_token(std::string_view tok) {
  tok = text::trim(tok);
  if (tok.size() >= 2 && tok.front() == '\'' && tok.back() == '\'') {
    std::string out;
    for (std::size_t i = 1; i + 1 < tok.size(); ++i) {
      out += tok[i];
      if (tok[i] == '\'' && tok[i + 1] == '\'') ++i;
    }
    return out;
  }
  return std::string(tok);
}

inline Phylogeny relabel_tips(const Phylogeny& tree, const std::map<std::string, std::string>& translate) {
  std::vector<TreeNode> nodes = tree.nodes();
  for (auto& n : nodes) {
    if (!n.is_tip()) continue;
    if (auto it = translate.find(n.label); it != translate.end()) n.label = it->second;
  }
  return Phylogeny(std::move(nodes));
}

inline TreeSample parse_nexus_trees(std::string_view contents) {
  auto statements = nexus_statements(contents);
  bool in_trees = false;
  std::map<std::string, std::string> translate;
  TreeSample out;
  for (const auto& st : statements) {
    std::string_view body = text::trim(st.text);
    if (text::to_lower(body.substr(0, 6)) == "#nexus") body = text::trim(body.substr(6));
    const std::string lower = text::to_lower(body);
    if (lower.starts_with("begin ")) {
      in_trees = text::trim(std::string_view(lower).substr(6)) == "trees";
      continue;
    }
    if (lower == "end" || lower == "endblock") {
      in_trees = false;
      continue;
    }
    if (!in_trees) continue;
    if (lower.starts_with("translate")) {
      for (auto pair : text::split(body.substr(9), ',')) {
        auto parts = text::split_ws(pair);
        if (parts.empty()) continue;
        if (parts.size() < 2)
          throw InputError("Nexus line " + std::to_string(st.line) + ": malformed translate entry");
        std::string rest(pair.substr(static_cast<std::size_t>(parts[1].data() - pair.data())));
        translate[strip_nexus_token(parts[0])] = strip_nexus_token(rest);
      }
      continue;
    }
    if (lower.starts_with("tree ") || lower.starts_with("utree ")) {
      // '=' may also appear inside [comments] before it.
      std::size_t eq = std::string_view::npos;
      for (std::size_t k = 0, depth = 0; k < body.size(); ++k) {
        if (body[k] == '[') ++depth;
        else if (body[k] == ']' && depth > 0) --depth;
        else if (body[k] == '=' && depth == 0) {
          eq = k;
          break;
        }
      }
      if (eq == std::string_view::npos)
        throw InputError("Nexus line " + std::to_string(st.line) + ": tree statement without '='");
      try {
        auto tree = parse_newick(std::string(body.substr(eq + 1)) + ";");
        out.push_back(translate.empty() ? std::move(tree) : relabel_tips(tree, translate));
      } catch (const InputError& e) {
        throw InputError("Nexus line " + std::to_string(st.line) + ": " + e.what());
      }
    }
  }
  return out;
}

}  // namespace detail

// One Newick statement per line (blank lines ignored), or a Nexus file whose
// TREES block may carry a translate table.
inline TreeSample parse_tree_sample(std::string_view contents) {
  TreeSample out;
  if (text::to_lower(text::trim(contents)).starts_with("#nexus")) {
    out = detail::parse_nexus_trees(contents);
  } else {
    auto rows = text::lines(contents);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (text::trim(rows[i]).empty()) continue;
      try {
        out.push_back(parse_newick(rows[i]));
      } catch (const InputError& e) {
        throw InputError("tree file line " + std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
  if (out.empty()) throw InputError("no trees");
  return out;
}

namespace detail {

// Branch length l with parent_depth + l closest to target in floating point.
// Plain summation of the merged lengths can be off by an ulp.
inline double bridging_length(double parent_depth, double target) {
  double l = target - parent_depth;
  for (int i = 0; i < 64 && parent_depth + l != target; ++i)
    l = std::nextafter(l, parent_depth + l < target ? HUGE_VAL : -HUGE_VAL);
  return std::max(l, 0.0);
}

}  // namespace detail

// Keeps only the tips in `keep`. Non-root nodes left with one child are
// suppressed and their branch merged into the child's, so root-to-node
// distances of the remaining nodes do not change. The pruned tree keeps the
// source depths, and merged lengths are chosen to reproduce them. A root left with one child stays as a unary root for the
// same reason.
inline Phylogeny prune(const Phylogeny& tree, const std::set<std::string>& keep) {
  std::vector<std::string> missing;
  for (const auto& k : keep)
    if (!tree.find_tip(k)) missing.push_back(k);
  if (!missing.empty()) {
    std::string msg = "prune: labels not in tree:";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw InputError(msg);
  }
  if (keep.size() < 2) throw InputError("prune: must keep at least 2 tips");

  // Number of kept tips below each node.
  const auto& nodes = tree.nodes();
  std::vector<int> kept(nodes.size(), 0);
  for (std::size_t i = nodes.size(); i-- > 0;) {
    if (nodes[i].is_tip()) kept[i] = keep.count(nodes[i].label) ? 1 : 0;
    if (nodes[i].parent >= 0) kept[static_cast<std::size_t>(nodes[i].parent)] += kept[i];
  }
  const auto depth = tree.depths();

  std::vector<TreeNode> out;
  std::vector<double> out_depth;
  // Emits the subtree at `id` under output node `parent`. `merged` is set when
  // suppressed ancestors sit between them.
  auto emit = [&](auto& self, int id, int parent, bool merged, bool merged_has_length) -> void {
    const auto& n = nodes[static_cast<std::size_t>(id)];
    std::vector<int> live;
    for (int c : n.children)
      if (kept[static_cast<std::size_t>(c)] > 0) live.push_back(c);
    if (parent >= 0 && live.size() == 1) {
      self(self, live.front(), parent, true, merged_has_length || n.has_length);
      return;
    }
    const int me = static_cast<int>(out.size());
    TreeNode copy;
    copy.label = n.label;
    copy.parent = parent;
    copy.length = merged ? detail::bridging_length(out_depth[static_cast<std::size_t>(parent)],
                                                   depth[static_cast<std::size_t>(id)])
                         : n.length;
    copy.has_length = n.has_length || merged_has_length;
    out.push_back(std::move(copy));
    out_depth.push_back(depth[static_cast<std::size_t>(id)]);
    if (parent >= 0) out[static_cast<std::size_t>(parent)].children.push_back(me);
    for (int c : live) self(self, c, me, false, false);
  };
  emit(emit, tree.root(), -1, false, false);
  return Phylogeny(std::move(out), std::move(out_depth));
}

// Taxon-indexed Brownian-motion covariance: entry (i, j) is the branch length
// shared by the root-to-tip paths of taxa i and j.
struct PhyloCovariance {
  std::vector<std::string> taxa;
  Eigen::MatrixXd matrix;

  std::size_t size() const { return taxa.size(); }

  // Rows/columns restricted and reordered to `order`.
  PhyloCovariance select(const std::vector<std::string>& order) const {
    std::unordered_map<std::string, Eigen::Index> pos;
    for (std::size_t i = 0; i < taxa.size(); ++i) pos.emplace(taxa[i], static_cast<Eigen::Index>(i));
    std::vector<Eigen::Index> idx;
    for (const auto& t : order) {
      auto it = pos.find(t);
      if (it == pos.end()) throw InputError("covariance has no taxon '" + t + "'");
      idx.push_back(it->second);
    }
    PhyloCovariance out{order, Eigen::MatrixXd(idx.size(), idx.size())};
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j)
        out.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = matrix(idx[i], idx[j]);
    return out;
  }

  static PhyloCovariance identity(std::vector<std::string> taxa) {
    const auto n = static_cast<Eigen::Index>(taxa.size());
    return {std::move(taxa), Eigen::MatrixXd::Identity(n, n)};
  }
};

// Taxa are in preorder tip order.
inline PhyloCovariance vcv(const Phylogeny& tree) {
  const auto& nodes = tree.nodes();
  const auto depth = tree.depths();
  std::vector<int> tip_index(nodes.size(), -1);
  PhyloCovariance cov;
  for (int t : tree.tips()) {
    tip_index[static_cast<std::size_t>(t)] = static_cast<int>(cov.taxa.size());
    cov.taxa.push_back(tree.node(t).label);
  }
  const auto n = static_cast<Eigen::Index>(cov.taxa.size());
  cov.matrix = Eigen::MatrixXd::Zero(n, n);

  // Postorder: tips below each node; pairs split at a node share its depth.
  std::vector<std::vector<int>> below(nodes.size());
  for (std::size_t i = nodes.size(); i-- > 0;) {
    const auto& node = nodes[i];
    if (node.is_tip()) {
      const int k = tip_index[i];
      cov.matrix(k, k) = depth[i];
      below[i] = {k};
      continue;
    }
    std::vector<int> acc;
    for (int c : node.children) {
      auto& sub = below[static_cast<std::size_t>(c)];
      for (int a : acc)
        for (int b : sub) cov.matrix(a, b) = cov.matrix(b, a) = depth[i];
      acc.insert(acc.end(), sub.begin(), sub.end());
      std::vector<int>().swap(sub);
    }
    below[i] = std::move(acc);
  }
  return cov;
}

inline PhyloCovariance vcv(const Phylogeny& tree, const std::vector<std::string>& order) {
  return vcv(tree).select(order);
}

// CSV with a header row and a leading label column.
inline std::string write_covariance_csv(const PhyloCovariance& cov) {
  std::string out = "taxon";
  for (const auto& t : cov.taxa) out += ',' + text::csv_field(t);
  out += '\n';
  for (std::size_t i = 0; i < cov.taxa.size(); ++i) {
    out += text::csv_field(cov.taxa[i]);
    for (std::size_t j = 0; j < cov.taxa.size(); ++j)
      out += ',' + text::format_double(cov.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    out += '\n';
  }
  return out;
}

// Matching key for taxon names: surrounding whitespace trimmed, underscores
// read as spaces.
inline std::string normalize_taxon(std::string_view name) {
  std::string out(text::trim(name));
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

struct TaxonReconciliation {
  std::vector<std::pair<std::string, std::string>> matched;  // (data name, tree label)
  std::vector<std::string> data_only;
  std::vector<std::string> tree_only;

  bool complete() const { return data_only.empty(); }

  // Three columns: in data only / in trees only / matched.
  std::string report_csv() const {
    std::string out = "in_data_only,in_trees_only,matched\n";
    const std::size_t rows = std::max({matched.size(), data_only.size(), tree_only.size()});
    for (std::size_t i = 0; i < rows; ++i) {
      out += (i < data_only.size() ? text::csv_field(data_only[i]) : "") + ',';
      out += (i < tree_only.size() ? text::csv_field(tree_only[i]) : "") + ',';
      out += (i < matched.size() ? text::csv_field(matched[i].first) : "") + '\n';
    }
    return out;
  }
};

inline TaxonReconciliation reconcile_taxa(const std::vector<std::string>& data_taxa,
                                          const std::vector<std::string>& tree_labels) {
  std::map<std::string, std::string> by_key;
  for (const auto& l : tree_labels) by_key.emplace(normalize_taxon(l), l);
  TaxonReconciliation r;
  std::set<std::string> used;
  for (const auto& d : data_taxa) {
    auto it = by_key.find(normalize_taxon(d));
    if (it == by_key.end()) {
      r.data_only.push_back(d);
    } else {
      r.matched.emplace_back(d, it->second);
      used.insert(it->second);
    }
  }
  for (const auto& l : tree_labels)
    if (!used.count(l)) r.tree_only.push_back(l);
  return r;
}

}  // namespace phyloload
