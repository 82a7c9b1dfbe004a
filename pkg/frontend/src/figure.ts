import { readFileSync } from "node:fs";
import { z } from "zod";

export class SpecError extends Error {}

export const figureSpecSchema = z
  .object({
    input: z.union([z.string(), z.array(z.string()).nonempty()]),
    kind: z.enum(["convergence", "moments", "trace"]),
    output: z.string(),
    xlabel: z.string().optional(),
    ylabel: z.string().optional(),
    fit: z.boolean().default(true),
  })
  .strict();

export type FigureSpec = z.infer<typeof figureSpecSchema>;
export type FigureKind = FigureSpec["kind"];

export function parseSpec(raw: unknown, where: string): FigureSpec {
  const res = figureSpecSchema.safeParse(raw);
  if (!res.success) {
    const issues = res.error.issues
      .map((i) => `${i.path.join(".") || "(root)"}: ${i.message}`)
      .join("; ");
    throw new SpecError(`${where}: ${issues}`);
  }
  return res.data;
}

export function loadSpec(path: string): FigureSpec {
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, "utf8"));
  } catch (e) {
    if (e instanceof SyntaxError) {
      throw new SpecError(`${path}: not valid JSON: ${e.message}`);
    }
    throw e;
  }
  return parseSpec(raw, path);
}

export function inputPaths(spec: FigureSpec): string[] {
  return typeof spec.input === "string" ? [spec.input] : [...spec.input];
}
