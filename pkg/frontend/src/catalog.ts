// The palette is generated from the served catalog; nothing here hard-codes
// a symbol list, so new kinds on the server appear automatically.

import type { AttrValue, AttributeSchema, Catalog, SymbolDef } from "./types.js";

export interface PaletteEntry {
  name: string;
  label: string;
  category: "capsule" | "connection";
  schema: AttributeSchema[];
}

/** One palette entry per drawable catalog kind (plain symbols are
    documentation-only in v1 documents and stay out of the palette). */
export function paletteFromCatalog(catalog: Catalog): PaletteEntry[] {
  const entries: PaletteEntry[] = [];
  for (const def of catalog.capsules) entries.push(toEntry(def, "capsule"));
  for (const def of catalog.connections) entries.push(toEntry(def, "connection"));
  return entries;
}

function toEntry(def: SymbolDef,
                 category: "capsule" | "connection"): PaletteEntry {
  return { name: def.name, label: def.label, category,
           schema: def.attributes };
}

/** Schema defaults, used when a symbol is first placed. */
export function defaultAttributes(schema: AttributeSchema[]):
    Record<string, AttrValue> {
  const out: Record<string, AttrValue> = {};
  for (const attr of schema) {
    if (attr.default !== undefined) {
      out[attr.name] = attr.default;
    } else if (attr.required) {
      if (attr.type === "int") out[attr.name] = attr.min ?? 1;
      else if (attr.type === "int_pair") out[attr.name] = [2, 2];
      else if (attr.type === "float") out[attr.name] = 1;
      else out[attr.name] = attr.choices?.[0] ?? "";
    }
  }
  return out;
}

export interface AttrProblem {
  name: string;
  message: string;
}

/** Client-side form checking only (types, positivity, required fields);
    shape semantics remain the server's business. */
export function checkAttributes(schema: AttributeSchema[],
                                attrs: Record<string, AttrValue>): AttrProblem[] {
  const problems: AttrProblem[] = [];
  const known = new Set(schema.map((a) => a.name));
  for (const name of Object.keys(attrs)) {
    if (!known.has(name)) problems.push({ name, message: "unknown attribute" });
  }
  for (const attr of schema) {
    const value = attrs[attr.name];
    if (value === undefined) {
      if (attr.required) problems.push({ name: attr.name, message: "required" });
      continue;
    }
    switch (attr.type) {
      case "int":
        if (typeof value !== "number" || !Number.isInteger(value)) {
          problems.push({ name: attr.name, message: "must be an integer" });
        } else if (attr.min !== undefined && value < attr.min) {
          problems.push({ name: attr.name, message: `must be >= ${attr.min}` });
        }
        break;
      case "int_pair":
        if (!Array.isArray(value) || value.length !== 2
            || !value.every((v) => Number.isInteger(v) && v >= (attr.min ?? 1))) {
          problems.push({ name: attr.name,
                          message: "must be a pair of positive integers" });
        }
        break;
      case "dtype":
        if (typeof value !== "string" || !(attr.choices ?? []).includes(value)) {
          problems.push({ name: attr.name,
                          message: `must be one of ${attr.choices?.join(", ")}` });
        }
        break;
      case "float":
        if (typeof value !== "number" || !Number.isFinite(value)) {
          problems.push({ name: attr.name, message: "must be a number" });
        }
        break;
    }
  }
  return problems;
}
