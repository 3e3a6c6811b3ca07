import type { TraceDto } from "./types.js";

function section(title: string, cls: string): HTMLElement {
  const box = document.createElement("section");
  box.className = `trace-section ${cls}`;
  const head = document.createElement("h3");
  head.textContent = title;
  box.appendChild(head);
  return box;
}

function pre(text: string): HTMLPreElement {
  const el = document.createElement("pre");
  el.textContent = text;
  return el;
}

function list(items: string[]): HTMLUListElement {
  const ul = document.createElement("ul");
  for (const item of items) {
    const li = document.createElement("li");
    li.textContent = item;
    ul.appendChild(li);
  }
  return ul;
}

/**
 * Render the pipeline trace into the drawer. Every rethink iteration is
 * shown verbatim: the point of the drawer is that an operator can see what
 * the agent tried, not a sanitized summary.
 */
export function renderTrace(container: HTMLElement, trace: TraceDto): void {
  container.replaceChildren();

  if (trace.annotations.length) {
    const box = section("Entities", "trace-entities");
    box.appendChild(
      list(
        trace.annotations.map((a) => {
          const canon = a.canonical ? ` -> ${a.canonical}` : "";
          return `${a.tag_path}: ${a.surface}${canon}`;
        }),
      ),
    );
    container.appendChild(box);
  }

  if (trace.probes.length) {
    const box = section("Verification probes", "trace-probes");
    for (const probe of trace.probes) box.appendChild(pre(probe));
    container.appendChild(box);
  }

  if (trace.docs.length || trace.rules.length) {
    const box = section("Knowledge", "trace-knowledge");
    if (trace.docs.length) {
      box.appendChild(
        list(trace.docs.map((d) => `${d.doc_id} (score ${d.score.toFixed(3)})`)),
      );
    }
    if (trace.rules.length) box.appendChild(list(trace.rules.map((r) => `rule ${r}`)));
    container.appendChild(box);
  }

  if (trace.tool_calls.length) {
    const box = section("Tool calls", "trace-tools");
    for (const call of trace.tool_calls) box.appendChild(pre(JSON.stringify(call)));
    container.appendChild(box);
  }

  const iters = section("Iterations", "trace-iterations");
  trace.iterations.forEach((it, i) => {
    const item = document.createElement("div");
    item.className = `trace-iteration stage-${it.verdict.status.toLowerCase()}`;
    const head = document.createElement("h4");
    head.textContent = `#${i + 1} ${it.verdict.status}`;
    item.appendChild(head);
    item.appendChild(pre(it.reply));
    if (it.verdict.message) {
      const msg = document.createElement("p");
      msg.className = "iteration-message";
      msg.textContent = it.verdict.message;
      item.appendChild(msg);
    }
    iters.appendChild(item);
  });
  container.appendChild(iters);

  if (trace.ir_text) {
    const box = section("IR", "trace-ir");
    box.appendChild(pre(trace.ir_text));
    container.appendChild(box);
  }
  if (trace.sql) {
    const box = section("SQL", "trace-sql");
    box.appendChild(pre(trace.sql));
    container.appendChild(box);
  }
}
