// SPDX-License-Identifier: Apache-2.0

//! Module-completion tasks: one per module, with that module's body masked.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::ShuttleId;
use crate::frontend::{ItemKind, ModuleDecl, PortDecl, SourceUnit, Span};
use crate::preprocess::MergedDesign;

pub const MASK_MARKER: &str = "// <<< IMPLEMENT THIS MODULE >>>";

pub const PROMPT_TEMPLATE: &str = include_str!("../assets/prompt_v1.txt");
pub const PROMPT_TEMPLATE_VERSION: &str = "prompt-v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamInfo {
    pub name: String,
    pub default: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interface {
    pub ports: Vec<PortDecl>,
    pub params: Vec<ParamInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub shuttle: ShuttleId,
    pub project_id: String,
    pub target_module: String,
    pub interface: Interface,
    pub context_source: String,
    pub golden_source: String,
    /// Byte range of the masked module inside `context_source`.
    pub mask_span: Span,
    pub prompt: String,
    pub prompt_template: String,
}

impl Task {
    /// The original design: context with the masked region replaced by the golden module.
    pub fn reconstruct(&self) -> String {
        let mut s = String::with_capacity(self.context_source.len() + self.golden_source.len());
        s.push_str(&self.context_source[..self.mask_span.start]);
        s.push_str(&self.golden_source);
        s.push_str(&self.context_source[self.mask_span.end..]);
        s
    }

    /// Context with `candidate` in place of the masked module.
    pub fn splice(&self, candidate: &str) -> String {
        let mut s = String::with_capacity(self.context_source.len() + candidate.len());
        s.push_str(&self.context_source[..self.mask_span.start]);
        s.push_str(candidate);
        s.push_str(&self.context_source[self.mask_span.end..]);
        s
    }
}

pub fn task_id(shuttle: &ShuttleId, project_id: &str, module: &str) -> String {
    format!("{}/{}/{}", shuttle.name, project_id, module)
}

/// The header of `m` followed by the mask marker and `endmodule`.
///
/// Non-ANSI modules also keep their port direction declarations and the
/// parameters that the interface depends on.
pub fn masked_module(source: &str, m: &ModuleDecl) -> String {
    let mut out = String::new();
    out.push_str(&source[m.span.start..m.header_end]);
    out.push('\n');
    let range_idents = port_range_idents(m);
    let mut kept: Vec<Span> = Vec::new();
    for item in &m.items {
        if item.span.start < m.header_end {
            continue;
        }
        let keep = match &item.kind {
            ItemKind::PortDir(_) => true,
            ItemKind::Param(name) => m
                .params
                .iter()
                .find(|p| &p.name == name)
                .is_some_and(|p| !p.local || range_idents.contains(name.as_str())),
            _ => false,
        };
        if !keep {
            continue;
        }
        // Multi-name declarations share one statement; copy it once.
        match kept.last_mut() {
            Some(last) if last.end == item.span.end => last.start = last.start.min(item.span.start),
            _ => kept.push(item.span),
        }
    }
    for s in kept {
        out.push_str("  ");
        out.push_str(s.slice(source));
        out.push('\n');
    }
    out.push_str("  ");
    out.push_str(MASK_MARKER);
    out.push_str("\nendmodule");
    out
}

fn port_range_idents(m: &ModuleDecl) -> BTreeSet<&str> {
    let mut ids = Vec::new();
    for p in &m.ports {
        if let Some(r) = &p.range {
            r.msb.idents(&mut ids);
            r.lsb.idents(&mut ids);
        }
    }
    let mut set: BTreeSet<&str> = ids.into_iter().collect();
    // Parameters referenced by those parameters, transitively.
    loop {
        let mut more = Vec::new();
        for p in &m.params {
            if set.contains(p.name.as_str()) {
                p.value.idents(&mut more);
            }
        }
        let before = set.len();
        set.extend(more);
        if set.len() == before {
            return set;
        }
    }
}

/// One task per module of `unit`, in declaration order.
pub fn build_tasks(design: &MergedDesign, unit: &SourceUnit) -> Vec<Task> {
    let src = &design.source;
    unit.modules
        .iter()
        .map(|m| {
            let masked = masked_module(src, m);
            let mut context = String::with_capacity(src.len());
            context.push_str(&src[..m.span.start]);
            let mask_start = context.len();
            context.push_str(&masked);
            let mask_end = context.len();
            context.push_str(&src[m.span.end..]);
            let mut task = Task {
                task_id: task_id(&design.shuttle, &design.project_id, &m.name),
                shuttle: design.shuttle.clone(),
                project_id: design.project_id.clone(),
                target_module: m.name.clone(),
                interface: Interface {
                    ports: m.ports.clone(),
                    params: m
                        .params
                        .iter()
                        .filter(|p| !p.local)
                        .map(|p| ParamInfo {
                            name: p.name.clone(),
                            default: p.default,
                        })
                        .collect(),
                },
                context_source: context,
                golden_source: m.span.slice(src).to_string(),
                mask_span: Span::new(mask_start, mask_end),
                prompt: String::new(),
                prompt_template: PROMPT_TEMPLATE_VERSION.to_string(),
            };
            task.prompt = render_prompt(&task);
            task
        })
        .collect()
}

/// Fills the versioned template. Placeholders are substituted in a single
/// pass, so placeholder-like text inside the design is left alone.
pub fn render_prompt(task: &Task) -> String {
    let mut out = String::with_capacity(PROMPT_TEMPLATE.len() + task.context_source.len());
    let mut rest = PROMPT_TEMPLATE;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let Some(close) = after.find("}}") else {
            out.push_str(&rest[open..]);
            return out;
        };
        match &after[..close] {
            "target_module" => out.push_str(&task.target_module),
            "context" => out.push_str(task.context_source.trim_end()),
            other => {
                out.push_str("{{");
                out.push_str(other);
                out.push_str("}}");
            }
        }
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    out
}
