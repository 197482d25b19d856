package org.geo.io;

import org.geo.*;

public class ShapeWriter {
    // writes one shape per line
    public String write(Shape shape) {
        if (shape instanceof Circle) {
            return "circle," + shape.area();
        }
        return "rect," + shape.area();
    }
}
