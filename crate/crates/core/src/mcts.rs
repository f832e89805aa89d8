//! Monte Carlo Tree Search over model rollouts.
//!
//! MCTS-CEM fits one Gaussian at the root with CEM and reuses it for every
//! expansion and rollout; MCTS-Random replaces it with uniform actions.

use std::fmt::Write as _;

use rand::Rng;

use crate::cem::fit_root_distribution;
use crate::dist::GaussianActionDistribution;
use crate::error::{Error, Result};
use crate::plan::{PlanContext, Planner, StepNoise};
use crate::rng::RngStream;
use crate::types::{Action, ActionBounds, State};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub state: State,
    pub action: Option<Action>,
    pub visits: u64,
    pub value_sum: f64,
    /// Rollouts launched from this node.
    pub rollouts: u64,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
    pub depth: usize,
}

impl TreeNode {
    /// Mean backed-up return; `None` before the first visit.
    pub fn q(&self) -> Option<f64> {
        (self.visits > 0).then(|| self.value_sum / self.visits as f64)
    }
}

/// Arena-allocated search tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
    n_children: usize,
    max_depth: usize,
}

impl Tree {
    pub fn new(root: State, n_children: usize, max_depth: usize) -> Self {
        Tree {
            nodes: vec![TreeNode {
                state: root,
                action: None,
                visits: 0,
                value_sum: 0.0,
                rollouts: 0,
                children: Vec::new(),
                parent: None,
                depth: 0,
            }],
            n_children,
            max_depth,
        }
    }

    pub const ROOT: NodeId = 0;

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_fully_expanded(&self, id: NodeId) -> bool {
        self.nodes[id].children.len() >= self.n_children
    }

    /// Nodes at the depth limit are leaves of the search.
    pub fn is_terminal(&self, id: NodeId) -> bool {
        self.nodes[id].depth >= self.max_depth
    }

    /// UCB1 child choice; unvisited children win outright, ties go to the
    /// earlier child.
    pub fn ucb_select(&self, id: NodeId, c_ucb: f64) -> Result<NodeId> {
        let parent = &self.nodes[id];
        if parent.children.is_empty() {
            return Err(Error::InvalidArgument(format!("node {id} has no children")));
        }
        if let Some(&fresh) = parent.children.iter().find(|&&c| self.nodes[c].visits == 0) {
            return Ok(fresh);
        }
        let ln_n = (parent.visits.max(1) as f64).ln();
        let mut best = parent.children[0];
        let mut best_score = f64::NEG_INFINITY;
        for &c in &parent.children {
            let child = &self.nodes[c];
            let score = child.value_sum / child.visits as f64 + c_ucb * (ln_n / child.visits as f64).sqrt();
            if score > best_score {
                best = c;
                best_score = score;
            }
        }
        Ok(best)
    }

    pub fn add_child(&mut self, id: NodeId, action: Action, state: State) -> Result<NodeId> {
        if self.is_fully_expanded(id) {
            return Err(Error::InvalidOperation(format!("node {id} is fully expanded")));
        }
        if self.is_terminal(id) {
            return Err(Error::InvalidOperation(format!("node {id} is at the depth limit")));
        }
        let child = self.nodes.len();
        let depth = self.nodes[id].depth + 1;
        self.nodes.push(TreeNode {
            state,
            action: Some(action),
            visits: 0,
            value_sum: 0.0,
            rollouts: 0,
            children: Vec::new(),
            parent: Some(id),
            depth,
        });
        self.nodes[id].children.push(child);
        Ok(child)
    }

    /// Adds the undiscounted return `g` to every node from `leaf` to the root.
    pub fn backpropagate(&mut self, leaf: NodeId, g: f64) {
        self.nodes[leaf].rollouts += 1;
        let mut cur = Some(leaf);
        while let Some(id) = cur {
            let node = &mut self.nodes[id];
            node.visits += 1;
            node.value_sum += g;
            cur = node.parent;
        }
    }

    /// Root child with the most visits (earliest on ties).
    pub fn best_child(&self) -> Option<NodeId> {
        let mut best: Option<NodeId> = None;
        for &c in &self.nodes[Self::ROOT].children {
            if best.map_or(true, |b| self.nodes[c].visits > self.nodes[b].visits) {
                best = Some(c);
            }
        }
        best
    }

    pub fn best_action(&self) -> Option<Action> {
        self.best_child().and_then(|c| self.nodes[c].action.clone())
    }

    /// One line per node: `id parent depth visits rollouts value_sum action...`.
    pub fn dump(&self) -> String {
        let mut out = String::from("# freeplan tree v1\n# id parent depth visits rollouts value_sum action\n");
        for (id, n) in self.nodes.iter().enumerate() {
            let parent = n.parent.map_or_else(|| "-".to_string(), |p| p.to_string());
            let action = match &n.action {
                None => "-".to_string(),
                Some(a) => a.0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
            };
            let _ = writeln!(out, "{id} {parent} {} {} {} {} {action}", n.depth, n.visits, n.rollouts, n.value_sum);
        }
        out
    }
}

/// One row of a parsed tree dump.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpRow {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub depth: usize,
    pub visits: u64,
    pub rollouts: u64,
    pub value_sum: f64,
    pub action: Option<Vec<f64>>,
}

/// Parses the text written by [`Tree::dump`].
pub fn parse_dump(text: &str) -> Result<Vec<DumpRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::Format(format!("line {}: bad {what}", lineno + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 7 {
            return Err(bad("field count"));
        }
        let parent = match fields[1] {
            "-" => None,
            p => Some(p.parse().map_err(|_| bad("parent"))?),
        };
        let action = match fields[6] {
            "-" => None,
            _ => Some(
                fields[6..]
                    .iter()
                    .map(|v| v.parse::<f64>().map_err(|_| bad("action")))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let row = DumpRow {
            id: fields[0].parse().map_err(|_| bad("id"))?,
            parent,
            depth: fields[2].parse().map_err(|_| bad("depth"))?,
            visits: fields[3].parse().map_err(|_| bad("visits"))?,
            rollouts: fields[4].parse().map_err(|_| bad("rollouts"))?,
            value_sum: fields[5].parse().map_err(|_| bad("value_sum"))?,
            action,
        };
        if row.id != rows.len() {
            return Err(bad("node order"));
        }
        if row.parent.is_some_and(|p| p >= row.id) {
            return Err(bad("parent reference"));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format("empty tree dump".into()));
    }
    Ok(rows)
}

/// Node ids whose visit count differs from children's visits plus own rollouts.
pub fn conservation_violations(rows: &[DumpRow]) -> Vec<NodeId> {
    let mut child_visits = vec![0u64; rows.len()];
    for r in rows {
        if let Some(p) = r.parent {
            child_visits[p] += r.visits;
        }
    }
    rows.iter()
        .filter(|r| r.visits != child_visits[r.id] + r.rollouts)
        .map(|r| r.id)
        .collect()
}

/// Action source for expansions and rollouts.
#[derive(Debug, Clone, PartialEq)]
pub enum TreePolicy {
    /// The CEM-fitted root distribution.
    Root(GaussianActionDistribution),
    /// Uniform over the action bounds.
    Uniform,
}

impl TreePolicy {
    fn uniform(bounds: &ActionBounds, rng: &mut RngStream) -> Action {
        Action::new(
            bounds
                .low()
                .iter()
                .zip(bounds.high())
                .map(|(l, h)| if l < h { rng.gen_range(*l..=*h) } else { *l })
                .collect(),
        )
    }

    /// Expansion samples the first-step marginal of the root distribution.
    pub fn expansion_action(&self, bounds: &ActionBounds, rng: &mut RngStream) -> Action {
        match self {
            TreePolicy::Root(d) => d.sample_step(0, rng, bounds),
            TreePolicy::Uniform => Self::uniform(bounds, rng),
        }
    }

    /// Rollouts follow the fitted plan's marginal for absolute step `t`.
    pub fn rollout_action(&self, t: usize, bounds: &ActionBounds, rng: &mut RngStream) -> Action {
        match self {
            TreePolicy::Root(d) => d.sample_step(t, rng, bounds),
            TreePolicy::Uniform => Self::uniform(bounds, rng),
        }
    }
}

/// Samples an action and adds the model's predicted child under `id`.
pub fn expand(tree: &mut Tree, id: NodeId, policy: &TreePolicy, ctx: &PlanContext<'_>, rng: &mut RngStream) -> Result<NodeId> {
    if tree.is_fully_expanded(id) || tree.is_terminal(id) {
        return Err(Error::InvalidOperation(format!("node {id} cannot be expanded")));
    }
    let action = policy.expansion_action(ctx.bounds, rng);
    let noise = StepNoise::draw(ctx, false, rng);
    let next = ctx.step(&tree.node(id).state, &action, &noise)?.next;
    tree.add_child(id, action, next)
}

/// Discounted model-rollout return from `state`, whose depth in the tree is
/// `depth`.
pub fn simulate_rollout(state: &State, depth: usize, policy: &TreePolicy, ctx: &PlanContext<'_>, rng: &mut RngStream) -> Result<f64> {
    let intrinsic = ctx.cfg.intrinsic_rollout && ctx.cfg.lambda > 0.0;
    let mut s = state.clone();
    let mut g = 0.0;
    let mut discount = 1.0;
    for t in 0..ctx.cfg.rollout_horizon {
        let a = policy.rollout_action(depth + t, ctx.bounds, rng);
        let noise = StepNoise::draw(ctx, intrinsic, rng);
        let step = ctx.step(&s, &a, &noise)?;
        g += discount * (step.reward + ctx.cfg.lambda * step.ev.unwrap_or(0.0));
        discount *= ctx.cfg.gamma;
        s = step.next;
    }
    Ok(g)
}

/// Runs `n_sim` select/expand/rollout/backup iterations from `s0`.
pub fn search(s0: &State, policy: &TreePolicy, ctx: &PlanContext<'_>, rng: &mut RngStream) -> Result<Tree> {
    let cfg = ctx.cfg;
    let mut tree = Tree::new(s0.clone(), cfg.n_children, cfg.max_depth);
    for _ in 0..cfg.n_sim {
        let mut v = Tree::ROOT;
        while !tree.is_terminal(v) && tree.is_fully_expanded(v) {
            v = tree.ucb_select(v, cfg.c_ucb)?;
        }
        if !tree.is_terminal(v) && !tree.is_fully_expanded(v) {
            v = expand(&mut tree, v, policy, ctx, rng)?;
        }
        let node = tree.node(v);
        let g = simulate_rollout(&node.state, node.depth, policy, ctx, rng)?;
        tree.backpropagate(v, g);
    }
    Ok(tree)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MctsVariant {
    Cem,
    Random,
}

/// Builds the tree for `variant` and returns it with the chosen action.
pub fn plan_with_tree(
    s0: &State,
    ctx: &PlanContext<'_>,
    rng: &mut RngStream,
    variant: MctsVariant,
    init: Option<GaussianActionDistribution>,
) -> Result<(Action, Tree, TreePolicy)> {
    let policy = match variant {
        MctsVariant::Cem => TreePolicy::Root(fit_root_distribution(s0, ctx, rng, init)?.dist),
        MctsVariant::Random => TreePolicy::Uniform,
    };
    let tree = search(s0, &policy, ctx, rng)?;
    let action = tree
        .best_action()
        .ok_or_else(|| Error::InvalidOperation("search produced no root children".into()))?;
    Ok((action, tree, policy))
}

pub fn mcts_plan(s0: &State, ctx: &PlanContext<'_>, rng: &mut RngStream, variant: MctsVariant) -> Result<Action> {
    plan_with_tree(s0, ctx, rng, variant, None).map(|(a, _, _)| a)
}

/// Receding-horizon MCTS controller; the tree is rebuilt every step.
#[derive(Debug)]
pub struct MctsPlanner {
    variant: MctsVariant,
    previous: Option<GaussianActionDistribution>,
    last_tree: Option<Tree>,
    keep_tree: bool,
}

impl MctsPlanner {
    pub fn cem() -> Self {
        MctsPlanner { variant: MctsVariant::Cem, previous: None, last_tree: None, keep_tree: false }
    }

    pub fn random() -> Self {
        MctsPlanner { variant: MctsVariant::Random, previous: None, last_tree: None, keep_tree: false }
    }

    /// Retain the most recent tree for inspection.
    pub fn keep_last_tree(mut self) -> Self {
        self.keep_tree = true;
        self
    }

    pub fn last_tree(&self) -> Option<&Tree> {
        self.last_tree.as_ref()
    }
}

impl Planner for MctsPlanner {
    fn plan(&mut self, state: &State, ctx: &PlanContext<'_>, rng: &mut RngStream) -> Result<Action> {
        let init = if ctx.cfg.warm_start { self.previous.as_ref().map(|d| d.shifted()) } else { None };
        let (action, tree, policy) = plan_with_tree(state, ctx, rng, self.variant, init)?;
        if let TreePolicy::Root(d) = policy {
            self.previous = Some(d);
        }
        if self.keep_tree {
            self.last_tree = Some(tree);
        }
        Ok(action)
    }

    fn reset(&mut self) {
        self.previous = None;
    }
}
