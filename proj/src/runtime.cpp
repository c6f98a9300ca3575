#include "sessc/runtime.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>

namespace sessc {

namespace {

// ------------------------------------------------------------ thread shapes

struct TState {
  DecompKind kind = DecompKind::Value;
  DPtr redex;
  std::function<DPtr(DPtr)> plug;
  std::string why;
  const DConstApp* app = nullptr;  // valid while redex is held
  int chan = -1, role = -1;        // endpoint argument of a channel op
  int chan2 = -1, role2 = -1;      // second endpoint of a cut
};

TState classify(const DPtr& term) {
  Decomp d = decompose(term);
  TState s;
  s.kind = d.kind;
  s.redex = d.redex;
  s.plug = d.plug;
  s.why = d.why;
  if (d.kind == DecompKind::Session) {
    s.app = &std::get<DConstApp>(s.redex->node);
    auto ep = [&](size_t k, int& c, int& r) {
      if (k < s.app->args.size())
        if (const auto* e = std::get_if<DEndpoint>(&s.app->args[k]->node)) {
          c = e->chan;
          r = e->role;
        }
    };
    if (s.app->name != "create" && s.app->name != "thread-create") ep(0, s.chan, s.role);
    if (s.app->name == "cut") ep(1, s.chan2, s.role2);
  }
  return s;
}

std::string local_detail(const DPtr& redex) {
  if (std::get_if<DApp>(&redex->node)) return "beta";
  if (std::get_if<DLetPair>(&redex->node)) return "split";
  if (std::get_if<DIf>(&redex->node)) return "if";
  if (std::get_if<DGuardElim>(&redex->node)) return "guard";
  if (std::get_if<DLetAssert>(&redex->node)) return "assert";
  if (std::get_if<DForallElim>(&redex->node)) return "inst";
  if (std::get_if<DLetExists>(&redex->node)) return "unpack";
  if (const auto* c = std::get_if<DConstApp>(&redex->node))
    return is_primitive(c->name) ? c->name : "call";
  return "local";
}

bool is_active_op(const std::string& op) {
  return op == "close" || op == "send" || op == "choose";
}
std::string dual_op(const std::string& op) {
  if (op == "close") return "wait";
  if (op == "wait") return "close";
  if (op == "send") return "recv";
  if (op == "recv") return "send";
  if (op == "choose") return "offer";
  if (op == "offer") return "choose";
  return "";
}
std::string pair_rule(const std::string& active) {
  if (active == "close") return "pr-end";
  if (active == "send") return "pr-msg";
  return "pr-branch";
}

// ------------------------------------------------------------ view handling

SPtr chan_type(int role, const SPtr& proto) { return scst("chan", {sint(role), proto}); }

const ChannelInfo* chan_info(const Pool& p, int c) {
  auto it = p.channels.find(c);
  return it == p.channels.end() ? nullptr : &it->second;
}

SPtr view_of(const Pool& p, int c, int r) {
  const ChannelInfo* ci = chan_info(p, c);
  return ci ? ci->view[r] : nullptr;
}

// ------------------------------------------------------ witness resolution

// Fresh witnesses are metas; a later communication fixes them by matching
// the receiving side's expected payload type against the sender's. The
// matcher binds metas on either side and leaves anything else to the
// re-typechecking audit.
void match_statics(const SPtr& a, const SPtr& b, std::map<std::string, SPtr>& out) {
  if (!a || !b) return;
  std::string ma, mb;
  bool isA = is_meta(a, &ma), isB = is_meta(b, &mb);
  if (isA && isB && ma == mb) return;
  auto bind = [&out](const std::string& m, const SPtr& t) {
    if (occurs_const(t, m)) return;
    auto it = out.find(m);
    if (it == out.end()) {
      out[m] = t;
      return;
    }
    if (!alpha_equal(it->second, t))
      throw StuckTerm("conflicting solutions for witness " + m);
  };
  if (isA) return bind(ma, b);
  if (isB) return bind(mb, a);
  const auto* ca = std::get_if<SCst>(&a->node);
  const auto* cb = std::get_if<SCst>(&b->node);
  if (ca && cb && ca->name == cb->name && ca->args.size() == cb->args.size()) {
    for (size_t i = 0; i < ca->args.size(); ++i) match_statics(ca->args[i], cb->args[i], out);
    return;
  }
  const auto* la = std::get_if<SLam>(&a->node);
  const auto* lb = std::get_if<SLam>(&b->node);
  if (la && lb && la->dom == lb->dom) return match_statics(la->body, lb->body, out);
  const auto* pa = std::get_if<SApp>(&a->node);
  const auto* pb = std::get_if<SApp>(&b->node);
  if (pa && pb) {
    match_statics(pa->fn, pb->fn, out);
    match_statics(pa->arg, pb->arg, out);
  }
}

SPtr value_singleton(const DPtr& v) {
  if (const auto* k = std::get_if<DIntLit>(&v->node)) return scst("int", {sint(k->v)});
  if (const auto* k = std::get_if<DBoolLit>(&v->node)) return scst("bool", {sbool(k->v)});
  return nullptr;
}

void resolve_metas(Pool& p, std::map<std::string, SPtr> m) {
  if (m.empty()) return;
  // settle short chains (?a := f(?b), ?b := k)
  for (int pass = 0; pass < 2; ++pass)
    for (auto& [k, v] : m) v = subst_consts(v, m);
  for (auto& [tid, term] : p.threads) term = subst_statics(term, m);
  for (auto& [cid, ci] : p.channels) {
    for (int r = 0; r < 2; ++r) {
      if (ci.view[r]) ci.view[r] = beta_normalize(subst_consts(ci.view[r], m));
      for (auto& v : ci.queue[r]) v = subst_statics(v, m);
    }
  }
  for (const auto& [k, v] : m) p.metaSorts.erase(k);
}

// ------------------------------------------------------------- bookkeeping

void recompute_holders(Pool& p) {
  for (auto& [cid, ci] : p.channels) ci.holder[0] = ci.holder[1] = -2;
  for (const auto& [tid, term] : p.threads) {
    std::map<std::pair<int, int>, int> eps;
    collect_endpoints(term, eps);
    for (const auto& [key, n] : eps) {
      auto it = p.channels.find(key.first);
      if (it != p.channels.end()) it->second.holder[key.second] = tid;
    }
  }
  for (auto& [cid, ci] : p.channels)
    for (int r = 0; r < 2; ++r)
      for (const auto& v : ci.queue[r]) {
        std::map<std::pair<int, int>, int> eps;
        collect_endpoints(v, eps);
        for (const auto& [key, n] : eps) {
          auto it = p.channels.find(key.first);
          if (it != p.channels.end()) it->second.holder[key.second] = -1;
        }
      }
}

DPtr annotate_param(const DPtr& clo, const SPtr& dom) {
  const auto* l = std::get_if<DLam>(&clo->node);
  if (!l) throw StuckTerm("spawn needs a closure value");
  if (l->ann || !dom) return clo;
  return mk(DLam{l->param, dom, l->linear, l->body}, clo->span);
}

std::string summarize(const DPtr& v) {
  std::string s = show_dyn(v);
  if (s.size() > 120) s = s.substr(0, 117) + "...";
  return s;
}

bool tag_of(const DPtr& v) {
  const auto* b = std::get_if<DBoolLit>(&v->node);
  if (!b) throw StuckTerm("branch tag is not a boolean value");
  return b->v;
}

// the existential package an offer hands its receiver
DPtr offer_package(bool b, int chan, int role, int withWitness) {
  DPtr body = mk(DPair{dbool(b), dendpoint(chan, role)});
  if (!withWitness) return body;
  return mk(DExistsIntro{sbool(b), body});
}

}  // namespace

// --------------------------------------------------------------- pool setup

FunResolver pool_funs(const Program& prog, bool materialized) {
  auto defs = std::make_shared<std::map<std::string, UserFunDef>>();
  for (const auto& f : prog.funs) {
    UserFunDef d;
    for (const auto& sp : f.staticParams) {
      d.staticParams.push_back({sp.name, sp.sort});
      if (sp.prop) d.props.push_back(sp.prop);
    }
    d.params = f.params;
    d.result = materialized ? f.result : nullptr;
    d.body = materialized ? f.body : erase_proofs(f.body);
    (*defs)[f.name] = std::move(d);
  }
  return [defs](const std::string& n) -> const UserFunDef* {
    auto it = defs->find(n);
    return it == defs->end() ? nullptr : &it->second;
  };
}

Pool make_pool(const Program& prog, bool materialized, bool buffered) {
  Pool p;
  p.materialized = materialized;
  p.buffered = buffered;
  p.threads[0] = prog.main ? (materialized ? prog.main : erase_proofs(prog.main)) : dunit();
  return p;
}

// ------------------------------------------------------------ enumeration

std::vector<Step> enabled_steps(const Pool& p, const FunResolver& funs) {
  (void)funs;
  std::vector<Step> out;
  // per-channel, per-role blocked channel operations
  std::map<int, std::map<int, std::pair<int, std::string>>> blocked;
  struct Mediator {
    int tid;
    int c[2];
    int r[2];
  };
  std::vector<Mediator> mediators;

  for (const auto& [tid, term] : p.threads) {
    TState s = classify(term);
    if (s.kind == DecompKind::Value) {
      if (tid != 0 && std::get_if<DUnit>(&term->node))
        out.push_back({"pr2", "", {tid}, {}, {}});
      continue;
    }
    if (s.kind == DecompKind::Local) {
      out.push_back({"pr0", local_detail(s.redex), {tid}, {}, {}});
      continue;
    }
    if (s.kind == DecompKind::Stuck) continue;  // surfaces through the blocked report
    const std::string& op = s.app->name;
    if (op == "thread-create") {
      out.push_back({"pr1", "", {tid}, {}, {}});
      continue;
    }
    if (op == "create") {
      out.push_back({"pr-create", "", {tid}, {}, {}});
      continue;
    }
    if (s.chan < 0) continue;  // malformed; surfaces as stuck in the report
    if (is_proof_op(op)) {
      SPtr v = view_of(p, s.chan, s.role);
      if (!v) continue;
      SessionHead h = session_head(v);
      bool ok = false;
      if ((op == "unify" || op == "exify") && h.kind == HeadKind::Quan) ok = true;
      if ((op == "itet" || op == "itef") && h.kind == HeadKind::Ite &&
          std::get_if<SBool>(&h.cond->node))
        ok = true;
      if (op == "recurse" && (h.kind == HeadKind::Fix || h.kind == HeadKind::HoFix)) ok = true;
      if (ok) out.push_back({"pr0", op, {tid}, s.chan, {}});
      continue;
    }
    if (op == "cut") {
      if (s.chan2 >= 0) mediators.push_back({tid, {s.chan, s.chan2}, {s.role, s.role2}});
      continue;
    }
    if (p.buffered) {
      const ChannelInfo* ci = chan_info(p, s.chan);
      if (!ci) continue;
      if (op == "send" || op == "choose") {
        out.push_back({op, "", {tid}, s.chan, {}});
        continue;
      }
      if ((op == "recv" || op == "offer") && !ci->queue[1 - s.role].empty()) {
        out.push_back({op, "", {tid}, s.chan, {}});
        continue;
      }
      if (op == "recv" || op == "offer") continue;
      // close/wait rendezvous below, once drained
    }
    blocked[s.chan][s.role] = {tid, op};
  }

  auto drained = [&p](int c) {
    const ChannelInfo* ci = chan_info(p, c);
    return ci && ci->queue[0].empty() && ci->queue[1].empty();
  };

  // direct rendezvous on dual endpoints of one channel
  for (const auto& [c, roles] : blocked) {
    auto a = roles.find(0), b = roles.find(1);
    if (a == roles.end() || b == roles.end()) continue;
    for (int active = 0; active < 2; ++active) {
      const auto& [t1, op1] = active == 0 ? a->second : b->second;
      const auto& [t2, op2] = active == 0 ? b->second : a->second;
      if (!is_active_op(op1) || op2 != dual_op(op1)) continue;
      if (p.buffered && !drained(c)) continue;  // close meets wait after the drain
      out.push_back({pair_rule(op1), "", {t1, t2}, c, {}});
    }
  }

  // mediated rendezvous across a cut thread
  for (const auto& m : mediators) {
    if (!chan_info(p, m.c[0]) || !chan_info(p, m.c[1])) continue;
    if (p.buffered) {
      // forward one queued value from either channel to the other
      for (int side = 0; side < 2; ++side) {
        int ci = m.c[side], co = m.c[1 - side];
        const ChannelInfo* in = chan_info(p, ci);
        if (in && !in->queue[1 - m.r[side]].empty())
          out.push_back({"forward", "", {m.tid}, ci, co});
      }
    }
    for (int side = 0; side < 2; ++side) {
      int ci = m.c[side], co = m.c[1 - side];
      auto bi = blocked.find(ci);
      auto bo = blocked.find(co);
      if (bi == blocked.end() || bo == blocked.end()) continue;
      auto e1 = bi->second.find(1 - m.r[side]);
      auto e2 = bo->second.find(1 - m.r[1 - side]);
      if (e1 == bi->second.end() || e2 == bo->second.end()) continue;
      const auto& [t1, op1] = e1->second;
      const auto& [t2, op2] = e2->second;
      if (!is_active_op(op1) || op2 != dual_op(op1)) continue;
      if (p.buffered && !(op1 == "close" && drained(ci) && drained(co))) continue;
      out.push_back({pair_rule(op1) == "pr-end"   ? "pr-cut-end"
                     : pair_rule(op1) == "pr-msg" ? "pr-cut-msg"
                                                  : "pr-cut-branch",
                     "", {t1, m.tid, t2}, ci, co});
    }
  }

  // two mediators holding dual endpoints of one channel compose
  for (size_t i = 0; i < mediators.size(); ++i)
    for (size_t j = i + 1; j < mediators.size(); ++j)
      for (int si = 0; si < 2; ++si)
        for (int sj = 0; sj < 2; ++sj) {
          const Mediator& A = mediators[i];
          const Mediator& B = mediators[j];
          if (A.c[si] != B.c[sj] || A.r[si] != 1 - B.r[sj]) continue;
          if (p.buffered && !drained(A.c[si])) continue;
          out.push_back({"pr-cut-cut", "", {A.tid, B.tid}, A.c[si], {}});
        }
  return out;
}

// -------------------------------------------------------------- application

namespace {

TState expect_session(const Pool& p, int tid, const std::string& op, const char* rule) {
  auto it = p.threads.find(tid);
  if (it == p.threads.end()) throw IllegalStep(std::string(rule) + ": no thread");
  TState s = classify(it->second);
  if (s.kind != DecompKind::Session || s.app->name != op)
    throw IllegalStep(std::string(rule) + ": thread " + std::to_string(tid) +
                      " is not blocked on " + op);
  return s;
}

SessionHead need_head(const Pool& p, int c, int r, HeadKind k, const char* who) {
  SPtr v = view_of(p, c, r);
  if (!v) throw StuckTerm(std::string(who) + ": endpoint has no view");
  SessionHead h = session_head(v);
  if (h.kind != k) throw StuckTerm(std::string(who) + ": view " + show_static(v) +
                                   " has the wrong head");
  return h;
}

void set_view(Pool& p, int c, int r, const SPtr& v) {
  auto it = p.channels.find(c);
  if (it != p.channels.end()) it->second.view[r] = v ? beta_normalize(v) : v;
}

// sender-to-receiver witness resolution at a value transfer
void resolve_at_transfer(Pool& p, const SPtr& recvPayload, const SPtr& sendPayload,
                         const DPtr& value) {
  if (!p.materialized) return;
  std::map<std::string, SPtr> m;
  match_statics(recvPayload, sendPayload, m);
  if (SPtr vt = value_singleton(value)) match_statics(recvPayload, vt, m);
  resolve_metas(p, std::move(m));
}

}  // namespace

void apply_step(Pool& p, const Step& s, const FunResolver& funs,
                std::vector<std::string>* output, TraceEntry* te) {
  if (te) {
    te->rule = s.rule;
    te->detail = s.detail;
    te->threads = s.threads;
    te->channel = s.channel;
    te->channel2 = s.channel2;
  }
  const std::string& r = s.rule;

  if (r == "pr2") {
    int tid = s.threads.at(0);
    auto it = p.threads.find(tid);
    if (tid == 0 || it == p.threads.end() || !std::get_if<DUnit>(&it->second->node))
      throw IllegalStep("pr2: thread is not a finished worker");
    p.threads.erase(it);
    return;
  }

  if (r == "pr0") {
    int tid = s.threads.at(0);
    auto it = p.threads.find(tid);
    if (it == p.threads.end()) throw IllegalStep("pr0: no thread");
    TState st = classify(it->second);
    if (st.kind == DecompKind::Local) {
      auto next = step_local(st.redex, funs, output);
      if (!next) throw IllegalStep("pr0: redex is not local");
      it->second = st.plug(*next);
      return;
    }
    if (st.kind != DecompKind::Session || !is_proof_op(st.app->name))
      throw IllegalStep("pr0: thread has no local redex");
    const std::string& op = st.app->name;
    DPtr ep = st.app->args.at(0);
    SPtr v = view_of(p, st.chan, st.role);
    if (!v) throw StuckTerm(op + ": endpoint has no view");
    SessionHead h = session_head(v);
    if (op == "unify") {
      if (h.kind != HeadKind::Quan) throw StuckTerm("unify off a quantifier head");
      if (st.app->staticArgs.empty()) throw StuckTerm("unify without its witness");
      set_view(p, st.chan, st.role, sapp(h.fn, st.app->staticArgs[0]));
      it->second = st.plug(ep);
      return;
    }
    if (op == "exify") {
      if (h.kind != HeadKind::Quan) throw StuckTerm("exify off a quantifier head");
      const auto* lam = std::get_if<SLam>(&h.fn->node);
      if (!lam) throw StuckTerm("exify: quantifier body is not an abstraction");
      std::string name = "?e" + std::to_string(p.nextMeta++);
      p.metaSorts[name] = lam->dom;
      set_view(p, st.chan, st.role, sapp(h.fn, scst(name)));
      it->second = st.plug(mk(DExistsIntro{scst(name), ep}));
      return;
    }
    if (op == "itet" || op == "itef") {
      if (h.kind != HeadKind::Ite) throw StuckTerm(op + " off a conditional head");
      const auto* b = std::get_if<SBool>(&h.cond->node);
      if (!b) throw StuckTerm(op + ": condition " + show_static(h.cond) + " is not settled");
      if (b->v != (op == "itet"))
        throw StuckTerm(op + " against condition " + show_static(h.cond));
      set_view(p, st.chan, st.role, b->v ? h.left : h.right);
      it->second = st.plug(ep);
      return;
    }
    if (op == "recurse") {
      if (h.kind != HeadKind::Fix && h.kind != HeadKind::HoFix)
        throw StuckTerm("recurse off a recursive head");
      set_view(p, st.chan, st.role, unfold_session(v));
      it->second = st.plug(ep);
      return;
    }
    throw IllegalStep("pr0: unknown proof operation " + op);
  }

  if (r == "pr1") {
    int tid = s.threads.at(0);
    TState st = expect_session(p, tid, "thread-create", "pr1");
    DPtr clo = st.app->args.at(0);
    if (p.materialized) clo = annotate_param(clo, scst("unit"));
    int t2 = p.nextThread++;
    p.threads[tid] = st.plug(dunit());
    p.threads[t2] = dapp(clo, dunit());
    recompute_holders(p);
    if (te) te->threads.push_back(t2);
    return;
  }

  if (r == "pr-create") {
    int tid = s.threads.at(0);
    TState st = expect_session(p, tid, "create", "pr-create");
    DPtr clo = st.app->args.at(0);
    SPtr proto;
    if (p.materialized) {
      if (st.app->staticArgs.empty()) throw StuckTerm("create without its protocol");
      proto = beta_normalize(st.app->staticArgs[0]);
      clo = annotate_param(clo, chan_type(0, proto));
    } else if (!std::get_if<DLam>(&clo->node)) {
      throw StuckTerm("spawn needs a closure value");
    }
    int c = p.nextChannel++;
    int t2 = p.nextThread++;
    ChannelInfo ci;
    ci.view[0] = proto;
    ci.view[1] = proto;
    p.channels[c] = std::move(ci);
    p.threads[tid] = st.plug(dendpoint(c, 1));
    p.threads[t2] = dapp(clo, dendpoint(c, 0));
    recompute_holders(p);
    if (te) {
      te->threads.push_back(t2);
      te->channel = c;
    }
    return;
  }

  if (r == "send" || r == "choose") {  // buffered enqueue
    int tid = s.threads.at(0);
    TState st = expect_session(p, tid, r, "enqueue");
    auto it = p.channels.find(st.chan);
    if (it == p.channels.end()) throw IllegalStep("enqueue: dead channel");
    DPtr v = st.app->args.at(1);
    if (r == "choose") v = dbool(tag_of(v));
    it->second.queue[st.role].push_back(v);
    if (p.materialized) {
      if (r == "send") {
        SessionHead h = need_head(p, st.chan, st.role, HeadKind::Msg, "send");
        set_view(p, st.chan, st.role, h.cont);
      } else {
        SessionHead h = need_head(p, st.chan, st.role, HeadKind::Branch, "choose");
        set_view(p, st.chan, st.role,
                 scst("ite", {sbool(tag_of(v)), h.left, h.right}));
      }
    }
    p.threads[tid] = st.plug(st.app->args.at(0));
    recompute_holders(p);
    if (te) {
      te->payload = summarize(v);
      te->dir = st.role;
    }
    return;
  }

  if (r == "recv" || r == "offer") {  // buffered dequeue
    int tid = s.threads.at(0);
    TState st = expect_session(p, tid, r, "dequeue");
    auto it = p.channels.find(st.chan);
    if (it == p.channels.end() || it->second.queue[1 - st.role].empty())
      throw IllegalStep("dequeue: nothing queued");
    DPtr v = it->second.queue[1 - st.role].front();
    it->second.queue[1 - st.role].pop_front();
    DPtr ep = st.app->args.at(0);
    if (r == "recv") {
      SPtr expect;
      if (p.materialized) {
        SessionHead h = need_head(p, st.chan, st.role, HeadKind::Msg, "recv");
        set_view(p, st.chan, st.role, h.cont);
        expect = h.payload;
      }
      p.threads[tid] = st.plug(mk(DPair{v, ep}));
      if (expect) resolve_at_transfer(p, expect, nullptr, v);
    } else {
      bool b = tag_of(v);
      if (p.materialized) {
        SessionHead h = need_head(p, st.chan, st.role, HeadKind::Branch, "offer");
        set_view(p, st.chan, st.role, scst("ite", {sbool(b), h.left, h.right}));
      }
      p.threads[tid] = st.plug(offer_package(b, st.chan, st.role, p.materialized));
    }
    recompute_holders(p);
    if (te) {
      te->payload = summarize(v);
      te->dir = 1 - st.role;
    }
    return;
  }

  if (r == "pr-end") {
    TState c1 = expect_session(p, s.threads.at(0), "close", "pr-end");
    TState c2 = expect_session(p, s.threads.at(1), "wait", "pr-end");
    if (c1.chan != c2.chan || c1.role == c2.role) throw IllegalStep("pr-end: not duals");
    p.channels.erase(c1.chan);
    p.threads[s.threads[0]] = c1.plug(dunit());
    p.threads[s.threads[1]] = c2.plug(dunit());
    recompute_holders(p);
    return;
  }

  if (r == "pr-msg") {
    TState c1 = expect_session(p, s.threads.at(0), "send", "pr-msg");
    TState c2 = expect_session(p, s.threads.at(1), "recv", "pr-msg");
    if (c1.chan != c2.chan || c1.role == c2.role) throw IllegalStep("pr-msg: not duals");
    DPtr v = c1.app->args.at(1);
    SPtr sent, expected;
    if (p.materialized) {
      SessionHead hs = need_head(p, c1.chan, c1.role, HeadKind::Msg, "send");
      SessionHead hr = need_head(p, c2.chan, c2.role, HeadKind::Msg, "recv");
      set_view(p, c1.chan, c1.role, hs.cont);
      set_view(p, c2.chan, c2.role, hr.cont);
      sent = hs.payload;
      expected = hr.payload;
    }
    p.threads[s.threads[0]] = c1.plug(c1.app->args.at(0));
    p.threads[s.threads[1]] = c2.plug(mk(DPair{v, c2.app->args.at(0)}));
    if (expected) resolve_at_transfer(p, expected, sent, v);
    recompute_holders(p);
    if (te) {
      te->payload = summarize(v);
      te->dir = c1.role;
    }
    return;
  }

  if (r == "pr-branch") {
    TState c1 = expect_session(p, s.threads.at(0), "choose", "pr-branch");
    TState c2 = expect_session(p, s.threads.at(1), "offer", "pr-branch");
    if (c1.chan != c2.chan || c1.role == c2.role) throw IllegalStep("pr-branch: not duals");
    bool b = tag_of(c1.app->args.at(1));
    if (p.materialized) {
      SessionHead hs = need_head(p, c1.chan, c1.role, HeadKind::Branch, "choose");
      SessionHead hr = need_head(p, c2.chan, c2.role, HeadKind::Branch, "offer");
      set_view(p, c1.chan, c1.role, scst("ite", {sbool(b), hs.left, hs.right}));
      set_view(p, c2.chan, c2.role, scst("ite", {sbool(b), hr.left, hr.right}));
    }
    p.threads[s.threads[0]] = c1.plug(c1.app->args.at(0));
    p.threads[s.threads[1]] =
        c2.plug(offer_package(b, c2.chan, c2.role, p.materialized));
    recompute_holders(p);
    if (te) {
      te->payload = b ? "true" : "false";
      te->dir = c1.role;
    }
    return;
  }

  if (r == "forward") {  // buffered mediation: move one queued value across
    TState m = expect_session(p, s.threads.at(0), "cut", "forward");
    int ci = s.channel.value(), co = s.channel2.value();
    int side = m.chan == ci ? 0 : 1;
    if ((side == 0 ? m.chan : m.chan2) != ci || (side == 0 ? m.chan2 : m.chan) != co)
      throw IllegalStep("forward: mediator does not span these channels");
    int rIn = side == 0 ? m.role : m.role2;
    int rOut = side == 0 ? m.role2 : m.role;
    auto in = p.channels.find(ci);
    auto outc = p.channels.find(co);
    if (in == p.channels.end() || outc == p.channels.end() || in->second.queue[1 - rIn].empty())
      throw IllegalStep("forward: nothing to move");
    DPtr v = in->second.queue[1 - rIn].front();
    in->second.queue[1 - rIn].pop_front();
    outc->second.queue[rOut].push_back(v);
    recompute_holders(p);
    if (te) {
      te->payload = summarize(v);
      te->dir = 1 - rIn;
      te->dir2 = rOut;
    }
    return;
  }

  if (r == "pr-cut-end" || r == "pr-cut-msg" || r == "pr-cut-branch") {
    const char* a1 = r == "pr-cut-end" ? "close" : r == "pr-cut-msg" ? "send" : "choose";
    const char* a2 = r == "pr-cut-end" ? "wait" : r == "pr-cut-msg" ? "recv" : "offer";
    TState c1 = expect_session(p, s.threads.at(0), a1, r.c_str());
    TState m = expect_session(p, s.threads.at(1), "cut", r.c_str());
    TState c2 = expect_session(p, s.threads.at(2), a2, r.c_str());
    int i = c1.chan, j = c2.chan;
    bool spans = (m.chan == i && m.chan2 == j) || (m.chan == j && m.chan2 == i);
    if (!spans || i == j) throw IllegalStep(r + ": mediator does not span these channels");
    int mi = m.chan == i ? m.role : m.role2;
    int mj = m.chan == j ? m.role : m.role2;
    if (c1.role != 1 - mi || c2.role != 1 - mj) throw IllegalStep(r + ": roles do not align");
    if (te) {
      te->channel = i;
      te->channel2 = j;
      te->dir = c1.role;
      te->dir2 = mj;  // the mediator re-sends on the passive-side channel
    }
    if (r == "pr-cut-end") {
      p.channels.erase(i);
      p.channels.erase(j);
      p.threads[s.threads[0]] = c1.plug(dunit());
      p.threads[s.threads[1]] = m.plug(dunit());
      p.threads[s.threads[2]] = c2.plug(dunit());
    } else if (r == "pr-cut-msg") {
      DPtr v = c1.app->args.at(1);
      SPtr sent, expected;
      if (p.materialized) {
        SessionHead hs = need_head(p, i, c1.role, HeadKind::Msg, "send");
        SessionHead hr = need_head(p, j, c2.role, HeadKind::Msg, "recv");
        set_view(p, i, c1.role, hs.cont);
        set_view(p, j, c2.role, hr.cont);
        sent = hs.payload;
        expected = hr.payload;
      }
      p.threads[s.threads[0]] = c1.plug(c1.app->args.at(0));
      p.threads[s.threads[2]] = c2.plug(mk(DPair{v, c2.app->args.at(0)}));
      if (expected) resolve_at_transfer(p, expected, sent, v);
      if (te) te->payload = summarize(v);
    } else {
      bool b = tag_of(c1.app->args.at(1));
      if (p.materialized) {
        SessionHead hs = need_head(p, i, c1.role, HeadKind::Branch, "choose");
        SessionHead hr = need_head(p, j, c2.role, HeadKind::Branch, "offer");
        set_view(p, i, c1.role, scst("ite", {sbool(b), hs.left, hs.right}));
        set_view(p, j, c2.role, scst("ite", {sbool(b), hr.left, hr.right}));
      }
      p.threads[s.threads[0]] = c1.plug(c1.app->args.at(0));
      p.threads[s.threads[2]] =
          c2.plug(offer_package(b, j, c2.role, p.materialized));
      if (te) te->payload = b ? "true" : "false";
    }
    recompute_holders(p);
    return;
  }

  if (r == "pr-cut-cut") {
    TState A = expect_session(p, s.threads.at(0), "cut", "pr-cut-cut");
    TState B = expect_session(p, s.threads.at(1), "cut", "pr-cut-cut");
    int shared = s.channel.value();
    int sa = A.chan == shared ? 0 : A.chan2 == shared ? 1 : -1;
    int sb = B.chan == shared ? 0 : B.chan2 == shared ? 1 : -1;
    if (sa < 0 || sb < 0) throw IllegalStep("pr-cut-cut: channel is not shared");
    int ra = sa == 0 ? A.role : A.role2;
    int rb = sb == 0 ? B.role : B.role2;
    if (ra != 1 - rb) throw IllegalStep("pr-cut-cut: endpoints are not duals");
    int oc[2] = {sa == 0 ? A.chan2 : A.chan, sb == 0 ? B.chan2 : B.chan};
    int orl[2] = {sa == 0 ? A.role2 : A.role, sb == 0 ? B.role2 : B.role};
    if (oc[0] == oc[1])
      throw StuckTerm("pr-cut-cut: composition closes a cycle on channel " +
                      std::to_string(oc[0]));
    if (p.materialized) set_view(p, oc[1], orl[1], view_of(p, oc[0], orl[0]));
    p.channels.erase(shared);
    p.threads[s.threads[0]] =
        A.plug(dconst("cut", {}, {dendpoint(oc[0], orl[0]), dendpoint(oc[1], orl[1])}));
    p.threads[s.threads[1]] = B.plug(dunit());
    recompute_holders(p);
    return;
  }

  throw IllegalStep("unknown rule " + r);
}

// ------------------------------------------------------------------ running

namespace {

bool pool_terminal(const Pool& p) {
  if (p.threads.size() != 1) return false;
  auto it = p.threads.begin();
  return it->first == 0 && is_value(it->second);
}

std::vector<BlockedShape> blocked_report(const Pool& p) {
  std::vector<BlockedShape> out;
  for (const auto& [tid, term] : p.threads) {
    TState s = classify(term);
    if (s.kind == DecompKind::Value) {
      if (tid != 0 && !std::get_if<DUnit>(&term->node))
        out.push_back({tid, "finished at a non-unit value", -1, -1, ""});
      continue;
    }
    if (s.kind == DecompKind::Local) {
      out.push_back({tid, "unapplied local step", -1, -1, ""});
      continue;
    }
    if (s.kind == DecompKind::Stuck) {
      out.push_back({tid, "stuck: " + s.why, -1, -1, ""});
      continue;
    }
    BlockedShape b{tid, s.app->name, s.chan, s.role, dual_op(s.app->name)};
    if (s.app->name == "cut")
      b.awaiting = "traffic on channel " + std::to_string(s.chan) + " or " +
                   std::to_string(s.chan2);
    if (is_proof_op(s.app->name)) b.awaiting = "a settled view";
    out.push_back(std::move(b));
  }
  return out;
}

bool pool_has_stuck(const Pool& p, std::string* why) {
  for (const auto& [tid, term] : p.threads) {
    TState s = classify(term);
    if (s.kind == DecompKind::Stuck) {
      *why = "thread " + std::to_string(tid) + ": " + s.why;
      return true;
    }
    if (s.kind == DecompKind::Session && s.app->name != "create" &&
        s.app->name != "thread-create" && s.chan < 0) {
      *why = "thread " + std::to_string(tid) + ": " + s.app->name + " off a non-endpoint";
      return true;
    }
  }
  return false;
}

}  // namespace

RunResult run_pool(Pool p, const FunResolver& funs, const Scheduler& sched,
                   const RunOpts& opts) {
  RunResult res;
  std::mt19937_64 rng(sched.seed);
  int rrNext = 0;
  for (;;) {
    std::vector<Step> steps;
    try {
      steps = enabled_steps(p, funs);
    } catch (const std::exception& e) {
      res.outcome.kind = Outcome::Kind::Stuck;
      res.outcome.message = e.what();
      return res;
    }
    if (steps.empty()) {
      if (pool_terminal(p)) {
        res.outcome.kind = Outcome::Kind::Terminated;
        res.outcome.value = p.threads.begin()->second;
      } else {
        std::string why;
        if (pool_has_stuck(p, &why)) {
          res.outcome.kind = Outcome::Kind::Stuck;
          res.outcome.message = why;
        } else {
          res.outcome.kind = Outcome::Kind::Deadlock;
          res.outcome.blocked = blocked_report(p);
        }
      }
      return res;
    }
    if (res.steps >= opts.maxSteps) {
      res.outcome.kind = Outcome::Kind::DepthExceeded;
      res.outcome.message = "step budget " + std::to_string(opts.maxSteps) + " exhausted";
      return res;
    }
    size_t pick = 0;
    if (sched.kind == Scheduler::Kind::Seeded) {
      pick = std::uniform_int_distribution<size_t>(0, steps.size() - 1)(rng);
    } else {
      // rotate over acting threads
      std::vector<int> tids;
      for (const auto& [tid, _] : p.threads) tids.push_back(tid);
      bool found = false;
      for (size_t off = 0; off < tids.size() && !found; ++off) {
        auto lb = std::lower_bound(tids.begin(), tids.end(), rrNext);
        size_t at = ((size_t)(lb - tids.begin()) + off) % tids.size();
        for (size_t k = 0; k < steps.size(); ++k)
          if (steps[k].threads[0] == tids[at]) {
            pick = k;
            rrNext = tids[at] + 1;
            found = true;
            break;
          }
      }
    }
    TraceEntry te;
    te.step = res.steps + 1;
    try {
      apply_step(p, steps[pick], funs, &res.output, &te);
    } catch (const std::exception& e) {
      res.outcome.kind = Outcome::Kind::Stuck;
      res.outcome.message = e.what();
      return res;
    }
    ++res.steps;
    if (opts.collectTrace) res.trace.push_back(te);
    if (opts.auditEachStep) {
      AuditResult a = audit_resources(p);
      if (!a.ok) {
        res.outcome.kind = Outcome::Kind::Stuck;
        res.outcome.message = "resource audit: " + a.violation;
        return res;
      }
    }
    if (opts.typecheckEachStep && opts.prog) {
      PoolTypeReport tr = typecheck_pool(p, *opts.prog);
      if (!tr.ok) {
        res.outcome.kind = Outcome::Kind::Stuck;
        res.outcome.message = "subject reduction: " + tr.error;
        return res;
      }
      ++res.checkedSteps;
    }
  }
}

// ----------------------------------------------------------------- explorer

namespace {

// Pool states compare up to renaming of channel ids, thread ids and runtime
// witnesses: render with workers sorted, then renumber identifier tokens by
// first occurrence.
std::string canon_pool(const Pool& p) {
  std::string txt;
  std::vector<std::string> workers;
  for (const auto& [tid, term] : p.threads) {
    if (tid == 0)
      txt = "M:" + show_dyn(term);
    else
      workers.push_back(show_dyn(term));
  }
  std::sort(workers.begin(), workers.end());
  for (const auto& w : workers) txt += "\nW:" + w;
  // canonical channel order: first mention in the thread text
  std::vector<int> order;
  std::set<int> seen;
  for (size_t i = 0; i + 4 < txt.size(); ++i)
    if (txt.compare(i, 4, "<ep ") == 0) {
      size_t j = i + 4;
      int id = 0;
      while (j < txt.size() && isdigit((unsigned char)txt[j])) id = id * 10 + (txt[j++] - '0');
      if (seen.insert(id).second) order.push_back(id);
    }
  for (const auto& [cid, _] : p.channels)
    if (seen.insert(cid).second) order.push_back(cid);
  for (int cid : order) {
    const ChannelInfo* ci = chan_info(p, cid);
    if (!ci) continue;
    for (int r = 0; r < 2; ++r) {
      txt += "\nV:<ep " + std::to_string(cid) + "." + (r == 0 ? "S" : "C") +
             ">=" + (ci->view[r] ? show_static(ci->view[r]) : "-");
      for (const auto& v : ci->queue[r]) txt += "|q:" + show_dyn(v);
    }
  }
  // renumber "<ep N." and "?eN" tokens by first occurrence
  std::string out;
  out.reserve(txt.size());
  std::map<int, int> chanMap;
  std::map<std::string, int> metaMap;
  for (size_t i = 0; i < txt.size();) {
    if (i + 4 < txt.size() && txt.compare(i, 4, "<ep ") == 0) {
      size_t j = i + 4;
      int id = 0;
      while (j < txt.size() && isdigit((unsigned char)txt[j])) id = id * 10 + (txt[j++] - '0');
      auto at = chanMap.insert({id, (int)chanMap.size()}).first;
      out += "<ep #" + std::to_string(at->second);
      i = j;
      continue;
    }
    if (i + 2 < txt.size() && txt[i] == '?' && txt[i + 1] == 'e' &&
        isdigit((unsigned char)txt[i + 2])) {
      size_t j = i + 2;
      std::string name;
      while (j < txt.size() && isdigit((unsigned char)txt[j])) name += txt[j++];
      auto at = metaMap.insert({name, (int)metaMap.size()}).first;
      out += "?m#" + std::to_string(at->second);
      i = j;
      continue;
    }
    out += txt[i++];
  }
  return out;
}

bool solo_deterministic(const std::string& rule) {
  return rule == "pr0" || rule == "pr1" || rule == "pr2" || rule == "pr-create" ||
         rule == "send" || rule == "choose" || rule == "recv" || rule == "offer" ||
         rule == "forward";
}

}  // namespace

ExploreResult explore(const Pool& start, const FunResolver& funs, long long maxStates) {
  ExploreResult res;
  std::set<std::string> visited;
  struct Frame {
    Pool pool;
    std::vector<Step> steps;
    size_t next = 0;
    TraceEntry via;
  };
  std::vector<Frame> stack;

  auto expand = [&funs](const Pool& p) {
    std::vector<Step> steps = enabled_steps(p, funs);
    // single-thread deterministic steps commute with everything else; expand
    // just the first when one exists
    for (const auto& s : steps)
      if (solo_deterministic(s.rule)) return std::vector<Step>{s};
    return steps;
  };
  auto witness_path = [&stack](TraceEntry last) {
    std::vector<TraceEntry> path;
    for (size_t i = 1; i < stack.size(); ++i) path.push_back(stack[i].via);
    path.push_back(std::move(last));
    for (size_t i = 0; i < path.size(); ++i) path[i].step = (long long)i + 1;
    return path;
  };

  visited.insert(canon_pool(start));
  res.statesVisited = 1;
  {
    std::vector<Step> s0 = expand(start);
    if (s0.empty()) {
      if (!pool_terminal(start)) {
        res.verdict = ExploreResult::Verdict::DeadlockFound;
        res.message = "initial pool is irreducible and non-terminal";
      }
      return res;
    }
    stack.push_back({start, std::move(s0), 0, {}});
  }
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next >= f.steps.size()) {
      stack.pop_back();
      continue;
    }
    Step s = f.steps[f.next++];
    Pool child = f.pool;
    TraceEntry te;
    try {
      apply_step(child, s, funs, nullptr, &te);
    } catch (const std::exception& e) {
      res.verdict = ExploreResult::Verdict::DeadlockFound;
      res.message = std::string("progress violation: ") + e.what();
      res.witness = witness_path(te);
      return res;
    }
    std::string key = canon_pool(child);
    if (!visited.insert(key).second) continue;
    ++res.statesVisited;
    if (res.statesVisited > maxStates) {
      res.verdict = ExploreResult::Verdict::DepthExceeded;
      res.message = "state budget " + std::to_string(maxStates) + " exhausted";
      return res;
    }
    std::vector<Step> cs;
    std::string why;
    if (pool_has_stuck(child, &why)) {
      res.verdict = ExploreResult::Verdict::DeadlockFound;
      res.message = "stuck state: " + why;
      res.witness = witness_path(te);
      return res;
    }
    cs = expand(child);
    if (cs.empty()) {
      if (!pool_terminal(child)) {
        res.verdict = ExploreResult::Verdict::DeadlockFound;
        res.message = "irreducible non-terminal pool";
        res.witness = witness_path(te);
        return res;
      }
      continue;
    }
    stack.push_back({std::move(child), std::move(cs), 0, std::move(te)});
  }
  return res;
}

// ------------------------------------------------------------------- audits

AuditResult audit_resources(const Pool& p) {
  std::map<std::pair<int, int>, int> occ;
  std::map<std::pair<int, int>, int> where;  // -1 queue, else thread
  for (const auto& [tid, term] : p.threads) {
    std::map<std::pair<int, int>, int> eps;
    collect_endpoints(term, eps);
    for (const auto& [k, n] : eps) {
      occ[k] += n;
      where[k] = tid;
    }
  }
  for (const auto& [cid, ci] : p.channels)
    for (int r = 0; r < 2; ++r)
      for (const auto& v : ci.queue[r]) {
        std::map<std::pair<int, int>, int> eps;
        collect_endpoints(v, eps);
        for (const auto& [k, n] : eps) {
          occ[k] += n;
          where[k] = -1;
        }
      }
  for (const auto& [k, n] : occ) {
    if (!p.channels.count(k.first))
      return {false, "endpoint of retired channel " + std::to_string(k.first) + " survives"};
    if (n != 1)
      return {false, "endpoint " + std::to_string(k.first) + "." + std::to_string(k.second) +
                         " occurs " + std::to_string(n) + " times"};
  }
  for (const auto& [cid, ci] : p.channels)
    for (int r = 0; r < 2; ++r) {
      auto it = occ.find({cid, r});
      if (it == occ.end())
        return {false, "endpoint " + std::to_string(cid) + "." + std::to_string(r) +
                           " of a live channel is gone"};
      if (ci.holder[r] != where[{cid, r}])
        return {false, "holder record for " + std::to_string(cid) + "." + std::to_string(r) +
                           " is stale"};
    }
  return {true, ""};
}

PoolTypeReport typecheck_pool(const Pool& p, const Program& prog) {
  if (!p.materialized)
    return {false, "erased pools carry no views to type against"};
  TypeEnv env;
  env.prog = &prog;
  for (const auto& [n, s] : p.metaSorts) env.store.declare(n, s);
  env.endpointType = [&p](int c, int r) -> SPtr {
    SPtr v = view_of(p, c, r);
    return v ? chan_type(r, v) : nullptr;
  };

  std::set<std::string> all;
  for (const auto& [cid, _] : p.channels) {
    all.insert("%ep:" + std::to_string(cid) + ":0");
    all.insert("%ep:" + std::to_string(cid) + ":1");
  }
  std::set<std::string> consumed;
  for (const auto& [tid, term] : p.threads) {
    Typed ty;
    try {
      ty = synth(env, term);
    } catch (const TypeError& e) {
      return {false, "thread " + std::to_string(tid) + ": " + e.what()};
    }
    if (tid != 0 && !type_leq(env, ty.type, scst("unit")))
      return {false, "thread " + std::to_string(tid) + " has type " + show_static(ty.type) +
                         ", every worker finishes at unit"};
    for (const auto& u : ty.used) {
      if (u.rfind("%ep:", 0) != 0)
        return {false, "thread " + std::to_string(tid) + " consumes stray linear " + u};
      if (!consumed.insert(u).second)
        return {false, "endpoint " + u + " is consumed by two threads"};
    }
  }
  for (const auto& k : all)
    if (!consumed.count(k)) return {false, "live endpoint " + k + " is consumed by no thread"};
  return {true, ""};
}

// -------------------------------------------------------------------- trace

namespace {
std::string json_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '"': o += "\\\""; break;
      case '\\': o += "\\\\"; break;
      case '\n': o += "\\n"; break;
      case '\t': o += "\\t"; break;
      default:
        if ((unsigned char)c < 0x20) {
          char buf[8];
          snprintf(buf, sizeof buf, "\\u%04x", c);
          o += buf;
        } else {
          o += c;
        }
    }
  }
  return o;
}
}  // namespace

std::string trace_json_line(const TraceEntry& e) {
  std::ostringstream o;
  o << "{\"step\":" << e.step << ",\"rule\":\"" << e.rule << "\"";
  if (!e.detail.empty()) o << ",\"detail\":\"" << json_escape(e.detail) << "\"";
  o << ",\"threads\":[";
  for (size_t i = 0; i < e.threads.size(); ++i) o << (i ? "," : "") << e.threads[i];
  o << "]";
  if (e.channel) o << ",\"channel\":" << *e.channel;
  if (e.channel2) o << ",\"channel2\":" << *e.channel2;
  if (e.dir) o << ",\"dir\":" << *e.dir;
  if (e.dir2) o << ",\"dir2\":" << *e.dir2;
  if (!e.payload.empty()) o << ",\"payload\":\"" << json_escape(e.payload) << "\"";
  o << "}";
  return o.str();
}

std::vector<CommEvent> comm_events(const std::vector<TraceEntry>& trace) {
  std::vector<CommEvent> out;
  for (const auto& e : trace) {
    if (e.rule == "pr-msg" || e.rule == "pr-branch" || e.rule == "send" || e.rule == "choose") {
      if (e.channel && e.dir) out.push_back({*e.channel, *e.dir, e.payload});
    } else if (e.rule == "pr-cut-msg" || e.rule == "pr-cut-branch") {
      if (e.channel && e.dir) out.push_back({*e.channel, *e.dir, e.payload});
      if (e.channel2 && e.dir2) out.push_back({*e.channel2, *e.dir2, e.payload});
    } else if (e.rule == "forward") {
      if (e.channel2 && e.dir2) out.push_back({*e.channel2, *e.dir2, e.payload});
    }
  }
  return out;
}

}  // namespace sessc
