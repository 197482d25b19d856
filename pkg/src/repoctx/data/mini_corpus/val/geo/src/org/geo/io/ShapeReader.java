package org.geo.io;

import org.geo.Circle;
import org.geo.Point;
import org.geo.Rectangle;
import org.geo.Shape;

public class ShapeReader {
    private static final char SEP = ',';

    public Shape parse(String line) {
        String[] parts = line.split(String.valueOf(SEP));
        if (parts[0].equals("circle")) {
            Point c = new Point(Double.parseDouble(parts[1]), Double.parseDouble(parts[2]));
            return new Circle(c, Double.parseDouble(parts[3]));
        }
        return new Rectangle(Double.parseDouble(parts[1]), Double.parseDouble(parts[2]));
    }
}
