//! Step-list tool graphs: `[[tool, arg; arg], [tool, {{step_0.output}}]]`.
//!
//! Arguments are `;`-separated and either all positional or written as
//! `name=value`. Inside an argument, `{{image_j}}` refers to the j-th user
//! image and `{{step_k.output}}` to the output of an earlier step. Literal
//! text may not contain brackets, `;` or `{{`.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::invocation::{InputArg, ToolInvocation};
use super::PlanError;
use crate::registry::{is_identifier, ToolCatalog};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TemplatePart {
    Text(String),
    Image(usize),
    Step(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Binding {
    Literal(String),
    UserImage(usize),
    StepOutput(usize),
    /// Literal text with embedded placeholders.
    Interpolated(Vec<TemplatePart>),
}

impl Binding {
    pub fn parse(text: &str) -> Result<Self, PlanError> {
        let mut parts = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find("{{") {
            if start > 0 {
                parts.push(TemplatePart::Text(rest[..start].to_string()));
            }
            let after = &rest[start + 2..];
            let end = after
                .find("}}")
                .ok_or_else(|| PlanError::BadPlaceholder(rest[start..].to_string()))?;
            parts.push(parse_placeholder(&after[..end])?);
            rest = &after[end + 2..];
        }
        if !rest.is_empty() {
            parts.push(TemplatePart::Text(rest.to_string()));
        }
        Ok(match parts.as_slice() {
            [] => Binding::Literal(String::new()),
            [TemplatePart::Text(t)] => Binding::Literal(t.clone()),
            [TemplatePart::Image(j)] => Binding::UserImage(*j),
            [TemplatePart::Step(k)] => Binding::StepOutput(*k),
            _ => Binding::Interpolated(parts),
        })
    }

    pub fn render(&self) -> String {
        match self {
            Binding::Literal(t) => t.clone(),
            Binding::UserImage(j) => format!("{{{{image_{j}}}}}"),
            Binding::StepOutput(k) => format!("{{{{step_{k}.output}}}}"),
            Binding::Interpolated(parts) => parts
                .iter()
                .map(|p| match p {
                    TemplatePart::Text(t) => t.clone(),
                    TemplatePart::Image(j) => format!("{{{{image_{j}}}}}"),
                    TemplatePart::Step(k) => format!("{{{{step_{k}.output}}}}"),
                })
                .collect(),
        }
    }

    /// Steps whose output this binding consumes.
    pub fn step_refs(&self) -> Vec<usize> {
        match self {
            Binding::StepOutput(k) => vec![*k],
            Binding::Interpolated(parts) => parts
                .iter()
                .filter_map(|p| match p {
                    TemplatePart::Step(k) => Some(*k),
                    _ => None,
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Whether the whole argument is a reference rather than free text.
    pub fn is_reference(&self) -> bool {
        matches!(self, Binding::UserImage(_) | Binding::StepOutput(_))
    }
}

fn parse_placeholder(inner: &str) -> Result<TemplatePart, PlanError> {
    let bad = || PlanError::BadPlaceholder(format!("{{{{{inner}}}}}"));
    let digits = |s: &str| -> Result<usize, PlanError> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        s.parse().map_err(|_| bad())
    };
    if let Some(j) = inner.strip_prefix("image_") {
        return Ok(TemplatePart::Image(digits(j)?));
    }
    if let Some(k) = inner.strip_prefix("step_").and_then(|s| s.strip_suffix(".output")) {
        return Ok(TemplatePart::Step(digits(k)?));
    }
    Err(bad())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepArg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub binding: Binding,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStep {
    pub id: usize,
    pub tool: String,
    pub args: Vec<StepArg>,
}

impl GraphStep {
    pub fn dependencies(&self) -> BTreeSet<usize> {
        self.args.iter().flat_map(|a| a.binding.step_refs()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphShape {
    Node,
    Chain,
    Dag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolGraph {
    pub steps: Vec<GraphStep>,
}

impl ToolGraph {
    /// Dependency edges `(from, to)`, deduplicated, in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        for step in &self.steps {
            for dep in step.dependencies() {
                edges.insert((dep, step.id));
            }
        }
        edges.into_iter().collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::from("[");
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push('[');
            out.push_str(&step.tool);
            for (j, arg) in step.args.iter().enumerate() {
                out.push_str(if j == 0 { ", " } else { "; " });
                if let Some(name) = &arg.name {
                    let _ = write!(out, "{name}=");
                }
                out.push_str(&arg.binding.render());
            }
            out.push(']');
        }
        out.push(']');
        out
    }

    /// A single-step graph for a tool invocation. `None` for "No" thoughts.
    pub fn from_invocation(inv: &ToolInvocation) -> Result<Option<Self>, PlanError> {
        let Some(tool) = inv.action.as_ref().filter(|_| inv.use_tool) else {
            return Ok(None);
        };
        let args = match &inv.action_input {
            Some(input) => input
                .args()
                .iter()
                .map(|InputArg { name, value }| {
                    Ok(StepArg {
                        name: name.clone(),
                        binding: Binding::parse(value)?,
                    })
                })
                .collect::<Result<Vec<_>, PlanError>>()?,
            None => Vec::new(),
        };
        Ok(Some(ToolGraph {
            steps: vec![GraphStep {
                id: 0,
                tool: tool.clone(),
                args,
            }],
        }))
    }
}

/// Parses a step list. Text after the closing bracket is ignored.
pub fn parse_tool_graph(text: &str) -> Result<ToolGraph, PlanError> {
    let malformed = |reason: &str| PlanError::MalformedGraph {
        reason: reason.to_string(),
        raw: text.to_string(),
    };
    let body = text.trim_start();
    let mut chars = body.char_indices().peekable();
    match chars.next() {
        Some((_, '[')) => {}
        _ => return Err(malformed("expected '['")),
    }
    let mut steps = Vec::new();
    loop {
        while chars.next_if(|(_, c)| c.is_whitespace()).is_some() {}
        match chars.next() {
            Some((start, '[')) => {
                let mut end = None;
                for (i, c) in chars.by_ref() {
                    match c {
                        ']' => {
                            end = Some(i);
                            break;
                        }
                        '[' => return Err(malformed("nested '[' inside a step")),
                        _ => {}
                    }
                }
                let end = end.ok_or_else(|| malformed("unbalanced brackets"))?;
                let id = steps.len();
                steps.push(parse_step(id, &body[start + 1..end]).map_err(|e| match e {
                    PlanError::MalformedGraph { reason, .. } => malformed(&reason),
                    other => other,
                })?);
            }
            Some((_, ']')) if steps.is_empty() => return Err(malformed("graph has no steps")),
            Some(_) => return Err(malformed("expected '[' to open a step")),
            None => return Err(malformed("unbalanced brackets")),
        }
        while chars.next_if(|(_, c)| c.is_whitespace()).is_some() {}
        match chars.next() {
            Some((_, ',')) => continue,
            Some((_, ']')) => break,
            Some(_) => return Err(malformed("expected ',' or ']' after a step")),
            None => return Err(malformed("unbalanced brackets")),
        }
    }
    Ok(ToolGraph { steps })
}

fn parse_step(id: usize, content: &str) -> Result<GraphStep, PlanError> {
    let malformed = |reason: String| PlanError::MalformedGraph {
        reason,
        raw: content.to_string(),
    };
    let (tool, args_text) = match content.split_once(',') {
        Some((tool, args)) => (tool.trim(), Some(args)),
        None => (content.trim(), None),
    };
    if tool.is_empty() {
        return Err(malformed(format!("step {id} has no tool name")));
    }
    let mut args = Vec::new();
    if let Some(args_text) = args_text {
        for segment in args_text.split(';').map(str::trim) {
            if segment.is_empty() {
                return Err(malformed(format!("step {id} has an empty argument")));
            }
            let (name, value) = match segment.split_once('=') {
                Some((key, value)) if is_identifier(key.trim()) => (Some(key.trim().to_string()), value.trim()),
                _ => (None, segment),
            };
            let binding = Binding::parse(value)?;
            for k in binding.step_refs() {
                if k >= id {
                    return Err(PlanError::ForwardReference { step: id, target: k });
                }
            }
            args.push(StepArg { name, binding });
        }
    }
    Ok(GraphStep {
        id,
        tool: tool.to_string(),
        args,
    })
}

/// A graph checked against a catalog, with arguments resolved to names and
/// one topological order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidatedGraph {
    pub graph: ToolGraph,
    /// Per step, argument name to binding.
    pub bindings: Vec<BTreeMap<String, Binding>>,
    pub order: Vec<usize>,
}

impl ValidatedGraph {
    pub fn steps(&self) -> &[GraphStep] {
        &self.graph.steps
    }

    /// Steps no other step depends on.
    pub fn sinks(&self) -> Vec<usize> {
        let sources: BTreeSet<usize> = self.graph.edges().iter().map(|(u, _)| *u).collect();
        (0..self.graph.steps.len()).filter(|i| !sources.contains(i)).collect()
    }
}

pub fn validate_graph(graph: &ToolGraph, catalog: &ToolCatalog) -> Result<ValidatedGraph, PlanError> {
    let n = graph.steps.len();
    let mut bindings = Vec::with_capacity(n);
    for (index, step) in graph.steps.iter().enumerate() {
        if step.id != index {
            return Err(PlanError::MalformedGraph {
                reason: format!("step at position {index} has id {}", step.id),
                raw: graph.render(),
            });
        }
        let card = catalog
            .card(&step.tool)
            .ok_or_else(|| PlanError::UnknownToolName(step.tool.clone()))?;
        let mut resolved = BTreeMap::new();
        let mut positional = 0;
        for arg in &step.args {
            let name = match &arg.name {
                Some(name) => {
                    if card.arg(name).is_none() {
                        return Err(PlanError::UnexpectedArg {
                            step: index,
                            tool: step.tool.clone(),
                            arg: name.clone(),
                        });
                    }
                    name.clone()
                }
                None => {
                    let spec = card.args.get(positional).ok_or_else(|| PlanError::UnexpectedArg {
                        step: index,
                        tool: step.tool.clone(),
                        arg: format!("#{positional}"),
                    })?;
                    positional += 1;
                    spec.name.clone()
                }
            };
            for k in arg.binding.step_refs() {
                if k >= n {
                    return Err(PlanError::ForwardReference { step: index, target: k });
                }
            }
            if resolved.insert(name.clone(), arg.binding.clone()).is_some() {
                return Err(PlanError::UnexpectedArg {
                    step: index,
                    tool: step.tool.clone(),
                    arg: name,
                });
            }
        }
        if let Some(missing) = card.args.iter().find(|a| a.required && !resolved.contains_key(&a.name)) {
            return Err(PlanError::MissingRequiredArg {
                step: index,
                tool: step.tool.clone(),
                arg: missing.name.clone(),
            });
        }
        bindings.push(resolved);
    }
    let order = topological_order(graph)?;
    Ok(ValidatedGraph {
        graph: graph.clone(),
        bindings,
        order,
    })
}

/// Kahn's algorithm, taking the lowest ready step id first.
fn topological_order(graph: &ToolGraph) -> Result<Vec<usize>, PlanError> {
    let n = graph.steps.len();
    let mut indegree = vec![0usize; n];
    let mut dependents = vec![Vec::new(); n];
    for (u, v) in graph.edges() {
        indegree[v] += 1;
        dependents[u].push(v);
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(u)) = ready.pop() {
        order.push(u);
        for &v in &dependents[u] {
            indegree[v] -= 1;
            if indegree[v] == 0 {
                ready.push(Reverse(v));
            }
        }
    }
    if order.len() != n {
        return Err(PlanError::CycleDetected);
    }
    Ok(order)
}

pub fn classify_shape(graph: &ToolGraph) -> GraphShape {
    let n = graph.steps.len();
    if n <= 1 {
        return GraphShape::Node;
    }
    let edges = graph.edges();
    if edges.len() != n - 1 {
        return GraphShape::Dag;
    }
    let mut indegree = vec![0usize; n];
    let mut outdegree = vec![0usize; n];
    for (u, v) in &edges {
        outdegree[*u] += 1;
        indegree[*v] += 1;
    }
    // n-1 acyclic edges with all degrees <= 1 form one path through every step
    if indegree.iter().chain(outdegree.iter()).all(|&d| d <= 1) {
        GraphShape::Chain
    } else {
        GraphShape::Dag
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_caption_is_node() {
        let g = parse_tool_graph("[[Image Caption, {{image_0}}]]").unwrap();
        assert_eq!(g.steps.len(), 1);
        assert_eq!(g.steps[0].args[0].binding, Binding::UserImage(0));
        assert_eq!(classify_shape(&g), GraphShape::Node);
    }

    #[test]
    fn segmentation_then_edit_is_chain() {
        let g = parse_tool_graph(
            "[[Human Segmentation, {{image_0}}], [Instruct Image Using Text, {{step_0.output}}; make background snowy]]",
        )
        .unwrap();
        assert_eq!(g.steps.len(), 2);
        assert_eq!(g.edges(), vec![(0, 1)]);
        assert_eq!(g.steps[1].args[1].binding, Binding::Literal("make background snowy".into()));
        assert_eq!(classify_shape(&g), GraphShape::Chain);
    }

    #[test]
    fn forward_reference_rejected() {
        let err = parse_tool_graph("[[A, {{step_1.output}}], [B, x]]").unwrap_err();
        assert!(matches!(err, PlanError::ForwardReference { step: 0, target: 1 }));
        let err = parse_tool_graph("[[A, {{step_0.output}}]]").unwrap_err();
        assert!(matches!(err, PlanError::ForwardReference { step: 0, target: 0 }));
    }

    #[test]
    fn malformed_inputs() {
        for text in ["", "[", "[[A, x]", "[[A, x]] ", "[]", "[[A, [x]]]", "[[A, x] [B]]", "[[, x]]", "[[A, x;; y]]"] {
            let result = parse_tool_graph(text);
            if text == "[[A, x]] " {
                assert!(result.is_ok());
            } else {
                assert!(matches!(result, Err(PlanError::MalformedGraph { .. })), "{text:?} -> {result:?}");
            }
        }
    }

    #[test]
    fn bad_placeholders() {
        for text in ["[[A, {{image_x}}]]", "[[A, {{step_0}}]]", "[[A, {{foo}}]]", "[[A, {{image_0]]"] {
            assert!(matches!(parse_tool_graph(text), Err(PlanError::BadPlaceholder(_))), "{text}");
        }
    }

    #[test]
    fn interpolated_argument() {
        let g = parse_tool_graph("[[Image Caption, {{image_0}}], [Text-to-Image Generation, a drawing of {{step_0.output}} in snow]]")
            .unwrap();
        assert_eq!(
            g.steps[1].args[0].binding,
            Binding::Interpolated(vec![
                TemplatePart::Text("a drawing of ".into()),
                TemplatePart::Step(0),
                TemplatePart::Text(" in snow".into()),
            ])
        );
        assert_eq!(g.edges(), vec![(0, 1)]);
        assert_eq!(parse_tool_graph(&g.render()).unwrap(), g);
    }

    #[test]
    fn diamond_is_dag() {
        let g = parse_tool_graph("[[A, x], [B, {{step_0.output}}], [C, {{step_0.output}}], [D, {{step_1.output}}; {{step_2.output}}]]")
            .unwrap();
        assert_eq!(classify_shape(&g), GraphShape::Dag);
    }

    #[test]
    fn fan_in_is_dag() {
        let g = parse_tool_graph("[[A, x], [B, y], [C, {{step_0.output}}; {{step_1.output}}]]").unwrap();
        assert_eq!(g.edges(), vec![(0, 2), (1, 2)]);
        assert_eq!(classify_shape(&g), GraphShape::Dag);
    }

    #[test]
    fn disconnected_steps_are_dag() {
        let g = parse_tool_graph("[[A, x], [B, y]]").unwrap();
        assert_eq!(classify_shape(&g), GraphShape::Dag);
    }

    #[test]
    fn skip_path_is_chain() {
        // 0 -> 2 -> 1 is not expressible (1 would reference 2), but 0 -> 1 -> 2 with a
        // named argument still forms a path
        let g = parse_tool_graph("[[A, x], [B, input={{step_0.output}}], [C, {{step_1.output}}]]").unwrap();
        assert_eq!(classify_shape(&g), GraphShape::Chain);
    }

    #[test]
    fn cycle_detected_on_hand_built_graph() {
        let g = ToolGraph {
            steps: vec![
                GraphStep { id: 0, tool: "A".into(), args: vec![StepArg { name: None, binding: Binding::StepOutput(1) }] },
                GraphStep { id: 1, tool: "B".into(), args: vec![StepArg { name: None, binding: Binding::StepOutput(0) }] },
            ],
        };
        assert!(matches!(topological_order(&g), Err(PlanError::CycleDetected)));
    }
}
