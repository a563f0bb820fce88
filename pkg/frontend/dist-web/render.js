/** Pure HTML/SVG string renderers.
 *
 * Everything rendered here derives from server responses; no prediction
 * logic happens client-side. Keeping these as string functions lets the
 * contract tests assert on output without a browser DOM.
 */
import { groupByDomain } from "./state.js";
export function escapeHtml(text) {
    return text
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}
export function renderTaskPicker(tasks) {
    if (tasks.length === 0) {
        return '<div class="empty-state">No tasks available on this server.</div>';
    }
    const groups = groupByDomain(tasks);
    const parts = [];
    for (const [domain, members] of groups) {
        const buttons = members
            .map((t) => `<button class="task-option" data-task="${escapeHtml(t.task)}">` +
            `${escapeHtml(t.task)}</button>`)
            .join("");
        parts.push(`<section class="domain-group"><h3>${escapeHtml(domain)}</h3>${buttons}</section>`);
    }
    return parts.join("");
}
export function renderBanner(banner) {
    if (!banner)
        return "";
    return (`<div class="banner error">${escapeHtml(banner)} ` +
        '<button class="retry">retry</button></div>');
}
export function renderTranscript(bubbles) {
    return bubbles
        .map((b) => {
        const classes = `bubble ${b.speaker} ${b.status}`;
        const retry = b.status === "failed" ? ' <button class="retry-send">retry</button>' : "";
        const action = b.action
            ? `<span class="action-tag">${escapeHtml(b.action)}</span>`
            : "";
        return `<div class="${classes}">${action}${escapeHtml(b.text)}${retry}</div>`;
    })
        .join("");
}
export function renderProbabilityBars(resp, topK = 5) {
    const top = resp.ranked.slice(0, topK);
    const shownMass = top.reduce((acc, r) => acc + r.probability, 0);
    const rows = top
        .map((r) => {
        const pct = (100 * r.probability).toFixed(1);
        return (`<div class="prob-row" data-action="${escapeHtml(r.action)}">` +
            `<span class="label">${escapeHtml(r.action)}</span>` +
            `<span class="bar" style="width:${pct}%"></span>` +
            `<span class="value">${pct}%</span></div>`);
    })
        .join("");
    return (`<div class="prob-panel" data-shown-mass="${shownMass.toFixed(6)}">` +
        `${rows}<div class="mass-note">top-${top.length} mass: ` +
        `${(100 * shownMass).toFixed(1)}%</div></div>`);
}
export function renderAlignments(alignments) {
    if (alignments.length === 0)
        return '<div class="alignments empty"></div>';
    const rows = alignments
        .map((a) => `<div class="alignment" data-node="${escapeHtml(a.node_id)}">` +
        `<span class="mass">${(100 * a.mass).toFixed(1)}%</span> ` +
        `<span class="node-text">${escapeHtml(a.node_text)}</span></div>`)
        .join("");
    return `<div class="alignments">${rows}</div>`;
}
function layerize(schema) {
    const depth = new Map();
    depth.set(schema.start, 0);
    const adjacency = new Map();
    for (const [from, to] of schema.edges) {
        const list = adjacency.get(from) ?? [];
        list.push(to);
        adjacency.set(from, list);
    }
    const queue = [schema.start];
    while (queue.length) {
        const cur = queue.shift();
        for (const nxt of adjacency.get(cur) ?? []) {
            if (!depth.has(nxt)) {
                depth.set(nxt, depth.get(cur) + 1);
                queue.push(nxt);
            }
        }
    }
    const slots = new Map();
    const nodes = [];
    for (const n of schema.nodes) {
        if (!depth.has(n.id))
            throw new Error(`node ${n.id} unreachable; layout failed`);
        const layer = depth.get(n.id);
        const slot = slots.get(layer) ?? 0;
        slots.set(layer, slot + 1);
        nodes.push({ id: n.id, kind: n.kind, layer, slot });
    }
    return nodes;
}
const NODE_W = 130;
const NODE_H = 34;
const GAP_X = 24;
const GAP_Y = 56;
/** Layered top-down graph panel; falls back to a text adjacency list. */
export function renderSchemaGraph(schema, highlight = []) {
    const marked = new Set(highlight);
    try {
        const nodes = layerize(schema);
        const pos = new Map();
        for (const n of nodes) {
            pos.set(n.id, {
                x: 10 + n.slot * (NODE_W + GAP_X),
                y: 10 + n.layer * (NODE_H + GAP_Y),
            });
        }
        const width = Math.max(...nodes.map((n) => pos.get(n.id).x + NODE_W)) + 10;
        const height = Math.max(...nodes.map((n) => pos.get(n.id).y + NODE_H)) + 10;
        const edges = schema.edges
            .map(([from, to]) => {
            const a = pos.get(from);
            const b = pos.get(to);
            if (!a || !b)
                throw new Error(`edge ${from}->${to} references missing node`);
            return (`<line x1="${a.x + NODE_W / 2}" y1="${a.y + NODE_H}" ` +
                `x2="${b.x + NODE_W / 2}" y2="${b.y}" class="edge"/>`);
        })
            .join("");
        const boxes = schema.nodes
            .map((n) => {
            const p = pos.get(n.id);
            const classes = `node ${n.kind}${marked.has(n.id) ? " highlighted" : ""}`;
            const label = n.text.length > 18 ? n.text.slice(0, 17) + "…" : n.text;
            return (`<g class="${classes}" data-node="${escapeHtml(n.id)}">` +
                `<rect x="${p.x}" y="${p.y}" width="${NODE_W}" height="${NODE_H}" rx="6"/>` +
                `<text x="${p.x + 8}" y="${p.y + 21}">${escapeHtml(label)}</text></g>`);
        })
            .join("");
        return (`<svg class="schema-graph" viewBox="0 0 ${width} ${height}" ` +
            `width="${width}" height="${height}">${edges}${boxes}</svg>`);
    }
    catch {
        const rows = schema.edges
            .map(([from, to]) => `<li${marked.has(from) || marked.has(to) ? ' class="highlighted"' : ""}>` +
            `${escapeHtml(from)} → ${escapeHtml(to)}</li>`)
            .join("");
        return `<ul class="schema-fallback">${rows}</ul>`;
    }
}
export function renderApp(state, schema) {
    const picker = state.sessionId
        ? ""
        : `<div id="picker">${renderTaskPicker(state.tasks)}</div>`;
    const transcript = `<div id="transcript">${renderTranscript(state.transcript)}</div>`;
    const panel = state.lastResponse
        ? `<div id="insight">${renderProbabilityBars(state.lastResponse)}` +
            `${renderAlignments(state.lastResponse.alignments)}</div>`
        : "";
    const graph = schema
        ? `<div id="graph">${renderSchemaGraph(schema, state.lastResponse?.alignments.map((a) => a.node_id) ?? [])}</div>`
        : "";
    return `${renderBanner(state.banner)}${picker}${transcript}${panel}${graph}`;
}
