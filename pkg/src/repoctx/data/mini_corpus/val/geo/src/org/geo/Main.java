package org.geo;

import java.util.ArrayList;
import java.util.List;

public class Main {
    public static void main(String[] args) {
        List<Shape> shapes = new ArrayList<>();
        shapes.add(new Circle(new Point(0, 0), 1.0));
        shapes.add(new Square(2.0));
        System.out.println("total = " + ShapeUtils.totalArea(shapes));
        System.out.println("largest = " + ShapeUtils.largest(shapes).label());
    }
}
